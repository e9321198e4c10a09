//! TNS3 binary tensor format.
//!
//! Layout: magic bytes `TNS3`, version byte `1`, flag byte (`0` = real f64,
//! `1` = complex f64 with interleaved re/im), three little-endian u64 dims
//! `(n1, n2, n3)`, then the payload in the canonical linearization (see the
//! module docs of [`crate::tensor`]). Readers reject wrong magic or version
//! and report the byte offset of any truncation.

use std::io::{Read, Write};

use num_complex::Complex64;

use super::{CTensor3, Tensor3};
use crate::error::{Error, Result};

pub const TNS3_MAGIC: [u8; 4] = *b"TNS3";
pub const TNS3_VERSION: u8 = 1;

/// A decoded TNS3 payload: real or complex.
#[derive(Debug, Clone)]
pub enum Tns3Payload {
    Real(Tensor3),
    Complex(CTensor3),
}

/// Serialize a tensor. The encoding is bit-exact: writing and re-reading
/// reproduces the payload byte for byte.
pub fn write_tns3<W: Write>(w: &mut W, t: &Tns3Payload) -> Result<()> {
    w.write_all(&TNS3_MAGIC)?;
    w.write_all(&[TNS3_VERSION])?;
    match t {
        Tns3Payload::Real(t) => {
            w.write_all(&[0u8])?;
            write_dims(w, t.dims())?;
            for v in t.data() {
                w.write_all(&v.to_le_bytes())?;
            }
        }
        Tns3Payload::Complex(t) => {
            w.write_all(&[1u8])?;
            write_dims(w, t.dims())?;
            for v in t.data() {
                w.write_all(&v.re.to_le_bytes())?;
                w.write_all(&v.im.to_le_bytes())?;
            }
        }
    }
    Ok(())
}

/// Deserialize either flavor of TNS3 payload.
pub fn read_tns3<R: Read>(r: &mut R) -> Result<Tns3Payload> {
    let mut offset = 0u64;
    let magic = read_exact(r, 4, &mut offset)?;
    if magic != TNS3_MAGIC {
        return Err(Error::format(0, format!("bad magic {magic:02x?}, expected \"TNS3\"")));
    }
    let version = read_exact(r, 1, &mut offset)?[0];
    if version != TNS3_VERSION {
        return Err(Error::format(4, format!("unsupported version {version}")));
    }
    let flag = read_exact(r, 1, &mut offset)?[0];
    if flag > 1 {
        return Err(Error::format(5, format!("unknown payload flag {flag}")));
    }
    let dims_bytes = read_exact(r, 24, &mut offset)?;
    let mut dims = [0usize; 3];
    for (d, chunk) in dims.iter_mut().zip(dims_bytes.chunks(8)) {
        let v = u64::from_le_bytes(chunk.try_into().unwrap());
        *d = usize::try_from(v)
            .map_err(|_| Error::format(6, format!("dimension {v} too large for this platform")))?;
    }
    let [n1, n2, n3] = dims;
    let count = n1
        .checked_mul(n2)
        .and_then(|v| v.checked_mul(n3))
        .ok_or_else(|| Error::format(6, "dimension product overflows".to_string()))?;

    if flag == 0 {
        let mut data = Vec::with_capacity(count);
        for _ in 0..count {
            let b = read_exact(r, 8, &mut offset)?;
            data.push(f64::from_le_bytes(b.try_into().unwrap()));
        }
        Ok(Tns3Payload::Real(Tensor3::from_vec(n1, n2, n3, data)?))
    } else {
        let mut data = Vec::with_capacity(count);
        for _ in 0..count {
            let re = read_exact(r, 8, &mut offset)?;
            let im = read_exact(r, 8, &mut offset)?;
            data.push(Complex64::new(
                f64::from_le_bytes(re.try_into().unwrap()),
                f64::from_le_bytes(im.try_into().unwrap()),
            ));
        }
        Ok(Tns3Payload::Complex(CTensor3::from_vec(n1, n2, n3, data)?))
    }
}

/// Deserialize and require a real payload.
pub fn read_tns3_real<R: Read>(r: &mut R) -> Result<Tensor3> {
    match read_tns3(r)? {
        Tns3Payload::Real(t) => Ok(t),
        Tns3Payload::Complex(_) => Err(Error::invalid(
            "expected a real tensor, found a complex payload".to_string(),
        )),
    }
}

fn write_dims<W: Write>(w: &mut W, dims: (usize, usize, usize)) -> Result<()> {
    for d in [dims.0, dims.1, dims.2] {
        w.write_all(&(d as u64).to_le_bytes())?;
    }
    Ok(())
}

fn read_exact<R: Read>(r: &mut R, n: usize, offset: &mut u64) -> Result<Vec<u8>> {
    let mut buf = vec![0u8; n];
    let mut filled = 0;
    while filled < n {
        let got = r.read(&mut buf[filled..])?;
        if got == 0 {
            return Err(Error::format(
                *offset + filled as u64,
                format!("unexpected end of file, needed {} more bytes", n - filled),
            ));
        }
        filled += got;
    }
    *offset += n as u64;
    Ok(buf)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::testutil::{rand_ctensor, rand_tensor, Rng};

    #[test]
    fn round_trip_is_byte_identical() {
        let mut rng = Rng::seed(21);
        let t = rand_tensor(&mut rng, 3, 4, 2);
        let mut bytes = Vec::new();
        write_tns3(&mut bytes, &Tns3Payload::Real(t.clone())).unwrap();
        let mut second = Vec::new();
        let back = read_tns3_real(&mut bytes.as_slice()).unwrap();
        write_tns3(&mut second, &Tns3Payload::Real(back)).unwrap();
        assert_eq!(bytes, second);
    }

    #[test]
    fn complex_round_trip() {
        let mut rng = Rng::seed(22);
        let t = rand_ctensor(&mut rng, 2, 3, 4);
        let mut bytes = Vec::new();
        write_tns3(&mut bytes, &Tns3Payload::Complex(t.clone())).unwrap();
        match read_tns3(&mut bytes.as_slice()).unwrap() {
            Tns3Payload::Complex(back) => assert_eq!(back, t),
            _ => panic!("expected complex payload"),
        }
    }

    #[test]
    fn rejects_bad_magic_and_version() {
        let mut rng = Rng::seed(23);
        let t = rand_tensor(&mut rng, 2, 2, 2);
        let mut bytes = Vec::new();
        write_tns3(&mut bytes, &Tns3Payload::Real(t)).unwrap();

        let mut bad = bytes.clone();
        bad[0] = b'X';
        assert!(matches!(
            read_tns3(&mut bad.as_slice()),
            Err(Error::Format { offset: 0, .. })
        ));

        let mut bad = bytes.clone();
        bad[4] = 9;
        assert!(matches!(
            read_tns3(&mut bad.as_slice()),
            Err(Error::Format { offset: 4, .. })
        ));
    }

    #[test]
    fn truncation_reports_offset() {
        let mut rng = Rng::seed(24);
        let t = rand_tensor(&mut rng, 2, 2, 2);
        let mut bytes = Vec::new();
        write_tns3(&mut bytes, &Tns3Payload::Real(t)).unwrap();
        bytes.truncate(bytes.len() - 3);
        match read_tns3(&mut bytes.as_slice()) {
            Err(Error::Format { offset, .. }) => assert!(offset > 0),
            other => panic!("expected format error, got {other:?}"),
        }
    }
}
