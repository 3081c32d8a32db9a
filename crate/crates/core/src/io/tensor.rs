use std::path::Path;

use crate::{DepthImage, Error, Mask, Result};

const MAGIC: &[u8; 4] = b"RVT1";
const HEADER: usize = 8;

/// Typed payload of a tensor file.
#[derive(Debug, Clone, PartialEq)]
pub enum TensorData {
    F32(Vec<f32>),
    F64(Vec<f64>),
    U8(Vec<u8>),
    U16(Vec<u16>),
}

impl TensorData {
    fn code(&self) -> u8 {
        match self {
            TensorData::F32(_) => 0,
            TensorData::F64(_) => 1,
            TensorData::U8(_) => 2,
            TensorData::U16(_) => 3,
        }
    }

    pub fn len(&self) -> usize {
        match self {
            TensorData::F32(v) => v.len(),
            TensorData::F64(v) => v.len(),
            TensorData::U8(v) => v.len(),
            TensorData::U16(v) => v.len(),
        }
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    /// Values widened to `f64`.
    pub fn to_f64(&self) -> Vec<f64> {
        match self {
            TensorData::F32(v) => v.iter().map(|x| *x as f64).collect(),
            TensorData::F64(v) => v.clone(),
            TensorData::U8(v) => v.iter().map(|x| *x as f64).collect(),
            TensorData::U16(v) => v.iter().map(|x| *x as f64).collect(),
        }
    }
}

fn element_size(code: u8) -> Option<usize> {
    match code {
        0 => Some(4),
        1 => Some(8),
        2 => Some(1),
        3 => Some(2),
        _ => None,
    }
}

/// Dense row-major array with a little-endian binary encoding:
/// `"RVT1"`, dtype code, rank, two reserved zero bytes, `rank` u32 dims,
/// then the payload.
#[derive(Debug, Clone, PartialEq)]
pub struct Tensor {
    pub dims: Vec<usize>,
    pub data: TensorData,
}

impl Tensor {
    pub fn new(dims: Vec<usize>, data: TensorData) -> Result<Self> {
        if dims.len() > u8::MAX as usize || dims.iter().any(|d| *d > u32::MAX as usize) {
            return Err(Error::Format(format!("unsupported tensor shape {dims:?}")));
        }
        let n: usize = dims.iter().product();
        if n != data.len() {
            return Err(Error::DimensionMismatch(format!("{} values for tensor shape {dims:?}", data.len())));
        }
        Ok(Self { dims, data })
    }

    pub fn encode(&self) -> Vec<u8> {
        let esize = element_size(self.data.code()).expect("known dtype");
        let mut out = Vec::with_capacity(HEADER + 4 * self.dims.len() + esize * self.data.len());
        out.extend_from_slice(MAGIC);
        out.push(self.data.code());
        out.push(self.dims.len() as u8);
        out.extend_from_slice(&0u16.to_le_bytes());
        for d in &self.dims {
            out.extend_from_slice(&(*d as u32).to_le_bytes());
        }
        match &self.data {
            TensorData::F32(v) => v.iter().for_each(|x| out.extend_from_slice(&x.to_le_bytes())),
            TensorData::F64(v) => v.iter().for_each(|x| out.extend_from_slice(&x.to_le_bytes())),
            TensorData::U8(v) => out.extend_from_slice(v),
            TensorData::U16(v) => v.iter().for_each(|x| out.extend_from_slice(&x.to_le_bytes())),
        }
        out
    }

    pub fn decode(bytes: &[u8]) -> Result<Self> {
        if bytes.len() < HEADER || &bytes[..4] != MAGIC {
            return Err(Error::Format("not an RVT1 tensor".into()));
        }
        let code = bytes[4];
        let rank = bytes[5] as usize;
        let esize = element_size(code).ok_or_else(|| Error::Format(format!("unknown dtype code {code}")))?;
        if bytes[6..8] != [0, 0] {
            return Err(Error::Format("reserved tensor header bytes are not zero".into()));
        }
        let body = HEADER + 4 * rank;
        if bytes.len() < body {
            return Err(Error::Format("truncated tensor header".into()));
        }
        let dims: Vec<usize> = bytes[HEADER..body]
            .chunks_exact(4)
            .map(|c| u32::from_le_bytes(c.try_into().expect("4 bytes")) as usize)
            .collect();
        let n = dims
            .iter()
            .try_fold(1usize, |a, d| a.checked_mul(*d))
            .ok_or_else(|| Error::Format("tensor size overflows".into()))?;
        let payload = &bytes[body..];
        if Some(payload.len()) != n.checked_mul(esize) {
            return Err(Error::Format(format!(
                "payload of {} bytes for shape {dims:?} of {esize}-byte elements",
                payload.len()
            )));
        }
        let data = match code {
            0 => TensorData::F32(payload.chunks_exact(4).map(|c| f32::from_le_bytes(c.try_into().unwrap())).collect()),
            1 => TensorData::F64(payload.chunks_exact(8).map(|c| f64::from_le_bytes(c.try_into().unwrap())).collect()),
            2 => TensorData::U8(payload.to_vec()),
            _ => TensorData::U16(payload.chunks_exact(2).map(|c| u16::from_le_bytes(c.try_into().unwrap())).collect()),
        };
        Ok(Self { dims, data })
    }

    pub fn write(&self, path: &Path) -> Result<()> {
        std::fs::write(path, self.encode()).map_err(|e| Error::io(path, e))
    }

    pub fn read(path: &Path) -> Result<Self> {
        let bytes = std::fs::read(path).map_err(|e| Error::io(path, e))?;
        Self::decode(&bytes).map_err(|e| Error::Format(format!("{}: {e}", path.display())))
    }

    fn image_dims(&self) -> Result<(usize, usize)> {
        match self.dims[..] {
            [h, w] => Ok((w, h)),
            _ => Err(Error::Format(format!("expected an H×W tensor, got {:?}", self.dims))),
        }
    }
}

/// Depth as an `H×W` f32 tensor (the precision generated depth is rounded to).
pub fn depth_to_tensor(d: &DepthImage) -> Tensor {
    Tensor { dims: vec![d.height, d.width], data: TensorData::F32(d.values.iter().map(|x| *x as f32).collect()) }
}

/// Depth as an `H×W` f64 tensor, for predictions.
pub fn depth_to_tensor_f64(d: &DepthImage) -> Tensor {
    Tensor { dims: vec![d.height, d.width], data: TensorData::F64(d.values.clone()) }
}

pub fn tensor_to_depth(t: &Tensor) -> Result<DepthImage> {
    let (w, h) = t.image_dims()?;
    match t.data {
        TensorData::F32(_) | TensorData::F64(_) => DepthImage::from_values(w, h, t.data.to_f64()),
        _ => Err(Error::Format("depth tensors must be floating point".into())),
    }
}

/// Mask as an `H×W` u8 tensor of 0/1.
pub fn mask_to_tensor(m: &Mask) -> Tensor {
    Tensor { dims: vec![m.height, m.width], data: TensorData::U8(m.data.iter().map(|b| *b as u8).collect()) }
}

pub fn tensor_to_mask(t: &Tensor) -> Result<Mask> {
    let (w, h) = t.image_dims()?;
    let TensorData::U8(v) = &t.data else {
        return Err(Error::Format("mask tensors must be u8".into()));
    };
    if v.iter().any(|x| *x > 1) {
        return Err(Error::Format("mask values must be 0 or 1".into()));
    }
    Mask::from_data(w, h, v.iter().map(|x| *x == 1).collect())
}

#[cfg(test)]
mod tests {
    use proptest::prelude::*;

    use super::*;

    fn data_strategy() -> impl Strategy<Value = (Vec<usize>, TensorData)> {
        prop::collection::vec(1usize..5, 0..4).prop_flat_map(|dims| {
            let n: usize = dims.iter().product();
            let d = dims.clone();
            prop_oneof![
                prop::collection::vec(any::<f32>(), n).prop_map(TensorData::F32),
                prop::collection::vec(any::<f64>(), n).prop_map(TensorData::F64),
                prop::collection::vec(any::<u8>(), n).prop_map(TensorData::U8),
                prop::collection::vec(any::<u16>(), n).prop_map(TensorData::U16),
            ]
            .prop_map(move |data| (d.clone(), data))
        })
    }

    fn bits(d: &TensorData) -> Vec<u64> {
        match d {
            TensorData::F32(v) => v.iter().map(|x| x.to_bits() as u64).collect(),
            TensorData::F64(v) => v.iter().map(|x| x.to_bits()).collect(),
            TensorData::U8(v) => v.iter().map(|x| *x as u64).collect(),
            TensorData::U16(v) => v.iter().map(|x| *x as u64).collect(),
        }
    }

    proptest! {
        #[test]
        fn round_trip_is_bit_exact((dims, data) in data_strategy()) {
            let t = Tensor::new(dims, data).unwrap();
            let back = Tensor::decode(&t.encode()).unwrap();
            prop_assert_eq!(&back.dims, &t.dims);
            prop_assert_eq!(back.data.code(), t.data.code());
            prop_assert_eq!(bits(&back.data), bits(&t.data));
        }
    }

    #[test]
    fn header_layout() {
        let t = Tensor::new(vec![2, 3], TensorData::U16(vec![1, 2, 3, 4, 5, 6])).unwrap();
        let b = t.encode();
        assert_eq!(&b[..8], b"RVT1\x03\x02\x00\x00");
        assert_eq!(&b[8..16], &[2, 0, 0, 0, 3, 0, 0, 0]);
        assert_eq!(&b[16..18], &[1, 0]);
        assert_eq!(b.len(), 16 + 12);
    }

    #[test]
    fn malformed_files_are_rejected() {
        let good = Tensor::new(vec![2], TensorData::F64(vec![1.0, 2.0])).unwrap().encode();
        let mut bad_magic = good.clone();
        bad_magic[0] = b'X';
        let mut bad_code = good.clone();
        bad_code[4] = 9;
        let mut bad_reserved = good.clone();
        bad_reserved[6] = 1;
        for b in [bad_magic, bad_code, bad_reserved, good[..good.len() - 1].to_vec(), good[..5].to_vec()] {
            assert!(matches!(Tensor::decode(&b), Err(Error::Format(_))));
        }
        assert!(Tensor::new(vec![3], TensorData::U8(vec![1])).is_err());
    }

    #[test]
    fn images_round_trip() {
        let d = DepthImage::from_values(3, 2, vec![0.0, 0.5, 1.25, 2.0, 0.0, 3.0]).unwrap();
        assert_eq!(tensor_to_depth(&Tensor::decode(&depth_to_tensor(&d).encode()).unwrap()).unwrap(), d);
        assert_eq!(tensor_to_depth(&depth_to_tensor_f64(&d)).unwrap(), d);
        let m = Mask::from_data(3, 2, vec![true, false, false, true, true, false]).unwrap();
        assert_eq!(tensor_to_mask(&mask_to_tensor(&m)).unwrap(), m);
        assert!(tensor_to_mask(&depth_to_tensor(&d)).is_err());
    }
}
