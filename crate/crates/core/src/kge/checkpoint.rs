//! Binary checkpoint format (all integers and floats little-endian):
//!
//! ```text
//! offset  size  field
//! 0       8     magic  b"PKGCKGE\0"
//! 8       4     u32 format version (1)
//! 12      4     u32 family tag (ModelFamily::tag)
//! 16      4     u32 dim
//! 20      4     u32 |E|
//! 24      4     u32 |R| (canonical relations; the table holds 2|R| rows)
//! 28      4     f32 gamma
//! 32      ..    f32 entity table, |E| × entity_width, row-major
//! ..      ..    f32 relation table, 2|R| × relation_width, row-major
//! ```
//!
//! Tables are stored as `f32`; an `f32` model round-trips bit-exactly.

use std::fs;
use std::io::{BufReader, BufWriter, Read, Write};
use std::path::Path;

use byteorder::{LittleEndian, ReadBytesExt, WriteBytesExt};
use ndarray::Array2;

use super::{EmbeddingModel, ModelError, ModelFamily};
use crate::scalar::Scalar;

pub const CHECKPOINT_MAGIC: &[u8; 8] = b"PKGCKGE\0";
pub const CHECKPOINT_VERSION: u32 = 1;

pub fn write_checkpoint_to<S: Scalar, W: Write>(model: &EmbeddingModel<S>, mut w: W) -> Result<(), ModelError> {
    let u32_of = |n: usize, what: &str| u32::try_from(n).map_err(|_| ModelError::Checkpoint(format!("{what} {n} exceeds u32")));
    w.write_all(CHECKPOINT_MAGIC)?;
    w.write_u32::<LittleEndian>(CHECKPOINT_VERSION)?;
    w.write_u32::<LittleEndian>(model.family().tag())?;
    w.write_u32::<LittleEndian>(u32_of(model.dim(), "dim")?)?;
    w.write_u32::<LittleEndian>(u32_of(model.num_entities(), "|E|")?)?;
    w.write_u32::<LittleEndian>(u32_of(model.num_relations(), "|R|")?)?;
    w.write_f32::<LittleEndian>(model.gamma().as_f64() as f32)?;
    for v in model.entities().iter().chain(model.relations().iter()) {
        w.write_f32::<LittleEndian>(v.as_f64() as f32)?;
    }
    w.flush()?;
    Ok(())
}

pub fn read_checkpoint_from<S: Scalar, R: Read>(mut r: R) -> Result<EmbeddingModel<S>, ModelError> {
    let mut magic = [0u8; 8];
    r.read_exact(&mut magic)?;
    if &magic != CHECKPOINT_MAGIC {
        return Err(ModelError::Checkpoint("bad magic".into()));
    }
    let version = r.read_u32::<LittleEndian>()?;
    if version != CHECKPOINT_VERSION {
        return Err(ModelError::Checkpoint(format!("unsupported version {version}")));
    }
    let tag = r.read_u32::<LittleEndian>()?;
    let family = ModelFamily::from_tag(tag).ok_or_else(|| ModelError::Checkpoint(format!("unknown family tag {tag}")))?;
    let dim = r.read_u32::<LittleEndian>()? as usize;
    let n_e = r.read_u32::<LittleEndian>()? as usize;
    let n_r = r.read_u32::<LittleEndian>()? as usize;
    let gamma = r.read_f32::<LittleEndian>()?;
    let mut table = |rows: usize, cols: usize| -> Result<Array2<S>, ModelError> {
        let mut buf = vec![0f32; rows * cols];
        r.read_f32_into::<LittleEndian>(&mut buf)?;
        Ok(Array2::from_shape_vec((rows, cols), buf.into_iter().map(|v| S::lit(v as f64)).collect())
            .expect("length matches shape"))
    };
    let entities = table(n_e, family.entity_width(dim))?;
    let relations = table(2 * n_r, family.relation_width(dim))?;
    let mut trailing = [0u8; 1];
    if r.read(&mut trailing)? != 0 {
        return Err(ModelError::Checkpoint("trailing bytes after relation table".into()));
    }
    EmbeddingModel::from_parts(family, dim, n_r, entities, relations, S::lit(gamma as f64))
}

pub fn write_checkpoint<S: Scalar>(model: &EmbeddingModel<S>, path: &Path) -> Result<(), ModelError> {
    let tmp = path.with_extension("tmp");
    let mut w = BufWriter::new(fs::File::create(&tmp)?);
    write_checkpoint_to(model, &mut w)?;
    w.into_inner().map_err(|e| e.into_error())?.sync_all()?;
    fs::rename(&tmp, path)?;
    Ok(())
}

pub fn read_checkpoint<S: Scalar>(path: &Path) -> Result<EmbeddingModel<S>, ModelError> {
    read_checkpoint_from(BufReader::new(fs::File::open(path)?))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn round_trip_is_bit_exact() {
        for family in ModelFamily::ALL {
            let mut m = EmbeddingModel::<f32>::random(family, 3, 7, 2, 11).unwrap();
            m.set_gamma(1.25);
            let mut bytes = Vec::new();
            write_checkpoint_to(&m, &mut bytes).unwrap();
            let expected_len = 32 + 4 * (7 * family.entity_width(3) + 4 * family.relation_width(3));
            assert_eq!(bytes.len(), expected_len);
            let back: EmbeddingModel<f32> = read_checkpoint_from(bytes.as_slice()).unwrap();
            assert_eq!(back.family(), family);
            let same = m.entities().iter().zip(back.entities().iter()).all(|(a, b)| a.to_bits() == b.to_bits())
                && m.relations().iter().zip(back.relations().iter()).all(|(a, b)| a.to_bits() == b.to_bits());
            assert!(same, "{family}");
            assert_eq!(back.gamma().to_bits(), m.gamma().to_bits());
        }
    }

    #[test]
    fn header_layout() {
        let m = EmbeddingModel::<f32>::zeros(ModelFamily::ComplEx, 2, 3, 1).unwrap();
        let mut bytes = Vec::new();
        write_checkpoint_to(&m, &mut bytes).unwrap();
        assert_eq!(&bytes[..8], b"PKGCKGE\0");
        assert_eq!(u32::from_le_bytes(bytes[8..12].try_into().unwrap()), 1);
        assert_eq!(u32::from_le_bytes(bytes[12..16].try_into().unwrap()), ModelFamily::ComplEx.tag());
        assert_eq!(u32::from_le_bytes(bytes[16..20].try_into().unwrap()), 2);
        assert_eq!(u32::from_le_bytes(bytes[20..24].try_into().unwrap()), 3);
        assert_eq!(u32::from_le_bytes(bytes[24..28].try_into().unwrap()), 1);
        assert_eq!(f32::from_le_bytes(bytes[28..32].try_into().unwrap()), 1.0);
    }

    #[test]
    fn rejects_corruption() {
        let m = EmbeddingModel::<f32>::zeros(ModelFamily::Cp, 2, 3, 1).unwrap();
        let mut bytes = Vec::new();
        write_checkpoint_to(&m, &mut bytes).unwrap();
        let mut bad = bytes.clone();
        bad[0] = b'X';
        assert!(read_checkpoint_from::<f32, _>(bad.as_slice()).is_err());
        let truncated = &bytes[..bytes.len() - 1];
        assert!(read_checkpoint_from::<f32, _>(truncated).is_err());
        let mut long = bytes.clone();
        long.push(0);
        assert!(read_checkpoint_from::<f32, _>(long.as_slice()).is_err());
    }
}
