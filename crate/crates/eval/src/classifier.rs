//! Reference domain classifier: a deliberately small two-layer network
//! (one strided convolution, one dense readout) trained on clean synthetic
//! samples. Stands in for external perceptual metrics when scoring whether
//! translations land in their target domain.

use autodiff::{adam_step, NArray, ParamTree, SeedStream, Tape};

use crate::dataset::LabeledSet;
use crate::{EvalError, Result};

pub struct ReferenceClassifier {
    params: ParamTree<f32>,
    image_size: usize,
    channels: usize,
}

impl ReferenceClassifier {
    fn init(image_size: usize, seed: u64) -> Result<Self> {
        let channels = 8;
        let mut rng = SeedStream::new(seed);
        let mut params = ParamTree::new();
        let bound = (1.0 / (3.0 * 9.0)).sqrt();
        params.insert("conv/w", rng.uniform_array(&[channels, 3, 3, 3], -bound, bound))?;
        params.insert("conv/b", NArray::zeros(&[channels]))?;
        let bound = (1.0 / channels as f64).sqrt();
        params.insert("out/w", rng.uniform_array(&[2, channels], -bound, bound))?;
        params.insert("out/b", NArray::zeros(&[2]))?;
        Ok(ReferenceClassifier {
            params,
            image_size,
            channels,
        })
    }

    fn logits<'t>(
        &'t self,
        tape: &'t Tape<f32>,
        params: &'t ParamTree<f32>,
        images: NArray<f32>,
    ) -> Result<autodiff::Var<'t, f32>> {
        let x = tape.leaf(images);
        let w = tape.param("conv/w", params.value("conv/w")?)?;
        let b = tape.param("conv/b", params.value("conv/b")?)?;
        let h = x.conv2d(w, 2, 1)?.channel_bias(b)?.leaky_relu(0.2);
        let pooled = h.mean_spatial()?;
        let w2 = tape.param("out/w", params.value("out/w")?)?;
        let b2 = tape.param("out/b", params.value("out/b")?)?;
        Ok(pooled.linear(w2, b2)?)
    }

    fn batch(images: &[NArray<f32>], idx: &[usize], size: usize) -> NArray<f32> {
        let stride = 3 * size * size;
        let mut out = NArray::zeros(&[idx.len(), 3, size, size]);
        for (row, &i) in idx.iter().enumerate() {
            out.data_mut()[row * stride..(row + 1) * stride].copy_from_slice(images[i].data());
        }
        out
    }

    /// Train on a labeled set until convergence (a few hundred Adam steps of
    /// binary logistic loss on the two-domain margin).
    pub fn train(set: &LabeledSet, seed: u64) -> Result<Self> {
        if set.is_empty() {
            return Err(EvalError::Config("empty classifier training set".into()));
        }
        let mut clf = Self::init(set.image_size, seed)?;
        let mut rng = SeedStream::new(seed ^ 0x5EED);
        let batch = 32.min(set.len());
        for _ in 0..400 {
            let idx: Vec<usize> = (0..batch).map(|_| rng.uniform_usize(set.len())).collect();
            let images = Self::batch(&set.images, &idx, set.image_size);
            let labels: Vec<usize> = idx.iter().map(|&i| set.labels[i]).collect();
            let other: Vec<usize> = labels.iter().map(|&y| 1 - y).collect();
            let tape = Tape::new();
            let logits = clf.logits(&tape, &clf.params, images)?;
            let margin = logits.pick_cols(&labels)?.sub(logits.pick_cols(&other)?)?;
            let loss = margin.neg().softplus().mean_all();
            let grads_all = tape.backward(loss)?;
            let grads = tape.param_grads(&grads_all);
            adam_step(&mut clf.params, &grads, 5e-3, 0.9, 0.999, 1e-8)?;
        }
        Ok(clf)
    }

    /// Predicted domain of each image.
    pub fn classify(&self, images: &[NArray<f32>]) -> Result<Vec<usize>> {
        let mut out = Vec::with_capacity(images.len());
        for chunk in images.chunks(64) {
            let idx: Vec<usize> = (0..chunk.len()).collect();
            let batch = Self::batch(chunk, &idx, self.image_size);
            let tape = Tape::new();
            let logits = self.logits(&tape, &self.params, batch)?;
            let vals = logits.value();
            for row in 0..chunk.len() {
                let (a, b) = (vals.data()[row * 2], vals.data()[row * 2 + 1]);
                out.push(usize::from(b > a));
            }
        }
        let _ = self.channels;
        Ok(out)
    }

    pub fn accuracy(&self, set: &LabeledSet) -> Result<f64> {
        let predicted = self.classify(&set.images)?;
        let hits = predicted
            .iter()
            .zip(set.labels.iter())
            .filter(|(p, y)| p == y)
            .count();
        Ok(hits as f64 / set.len() as f64)
    }

    /// Fraction of images classified into their target domain.
    pub fn domain_score(&self, images: &[NArray<f32>], targets: &[usize]) -> Result<f64> {
        if images.len() != targets.len() {
            return Err(EvalError::InvalidArgument(format!(
                "{} images vs {} target labels",
                images.len(),
                targets.len()
            )));
        }
        let predicted = self.classify(images)?;
        let hits = predicted
            .iter()
            .zip(targets.iter())
            .filter(|(p, y)| p == y)
            .count();
        Ok(hits as f64 / images.len() as f64)
    }
}
