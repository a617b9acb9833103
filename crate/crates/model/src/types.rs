use autodiff::{NArray, Real, SeedStream};

use crate::{ModelError, Result};

/// Operating mode of the codec. Serializes to a single container flag bit.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum Mode {
    Autoencode,
    Translate,
}

impl Mode {
    pub fn bit(self) -> bool {
        matches!(self, Mode::Translate)
    }

    pub fn from_bit(bit: bool) -> Self {
        if bit {
            Mode::Translate
        } else {
            Mode::Autoencode
        }
    }

    /// One-hot encoding `[is_autoencode, is_translate]`, replicated per row.
    pub fn one_hot<T: Real>(self, rows: usize) -> NArray<T> {
        let mut arr = NArray::zeros(&[rows, 2]);
        let col = match self {
            Mode::Autoencode => 0,
            Mode::Translate => 1,
        };
        for r in 0..rows {
            arr.data_mut()[r * 2 + col] = T::ONE;
        }
        arr
    }

    pub fn tag(self) -> &'static str {
        match self {
            Mode::Autoencode => "A",
            Mode::Translate => "T",
        }
    }
}

/// Domain label in `[0, domains)`.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct DomainLabel(pub usize);

impl DomainLabel {
    pub fn checked(value: usize, domains: usize) -> Result<Self> {
        if value >= domains {
            return Err(ModelError::InvalidArgument(format!(
                "domain label {value} out of range 0..{domains}"
            )));
        }
        Ok(DomainLabel(value))
    }
}

/// Where a style vector came from.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum StyleOrigin {
    LatentGuided,
    ReferenceGuided,
}

/// Fixed-length style vector with provenance.
#[derive(Clone, Debug, PartialEq)]
pub struct StyleVector {
    pub values: Vec<f32>,
    pub origin: StyleOrigin,
}

impl StyleVector {
    pub fn new(values: Vec<f32>, origin: StyleOrigin) -> Self {
        StyleVector { values, origin }
    }
}

/// Random seed vector feeding the mapping network.
#[derive(Clone, Debug, PartialEq)]
pub struct StyleSeed(pub Vec<f32>);

impl StyleSeed {
    pub fn sample(rng: &mut SeedStream, dim: usize) -> Self {
        StyleSeed((0..dim).map(|_| rng.normal_f64() as f32).collect())
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum QuantPhase {
    Training,
    Inference,
}

/// Content latent in its three lives: continuous encoder output, integer
/// quantization (inference only), and the dequantized value the decoder
/// consumes (noisy during training, `q` cast back to real at inference).
#[derive(Clone, Debug)]
pub struct LatentCode {
    pub shape: Vec<usize>,
    pub continuous: NArray<f32>,
    pub quantized: Option<Vec<i32>>,
    pub dequantized: NArray<f32>,
}

/// Scalar quantization: additive uniform noise during training (the
/// differentiable proxy), round-half-away-from-zero at inference.
pub fn quantize(z: &NArray<f32>, phase: QuantPhase, rng: &mut SeedStream) -> LatentCode {
    match phase {
        QuantPhase::Training => {
            let mut noisy = z.clone();
            for v in noisy.data_mut() {
                *v += rng.uniform_f64(-0.5, 0.5) as f32;
            }
            LatentCode {
                shape: z.shape().to_vec(),
                continuous: z.clone(),
                quantized: None,
                dequantized: noisy,
            }
        }
        QuantPhase::Inference => {
            let q: Vec<i32> = z.data().iter().map(|&v| v.round() as i32).collect();
            let dequantized =
                NArray::from_vec(z.shape(), q.iter().map(|&v| v as f32).collect()).expect("shape");
            LatentCode {
                shape: z.shape().to_vec(),
                continuous: z.clone(),
                quantized: Some(q),
                dequantized,
            }
        }
    }
}

/// Clamp image values into [0, 1].
pub fn clamp01(img: &mut NArray<f32>) {
    for v in img.data_mut() {
        *v = v.clamp(0.0, 1.0);
    }
}
