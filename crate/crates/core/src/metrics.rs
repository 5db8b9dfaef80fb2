//! Train/test split and image metrics.

use std::fmt::Write as _;
use std::path::Path;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::loss::ssim_with_grad;
use crate::model::Image;

pub const TEST_FRACTION: f64 = 0.2;
pub const MIN_SPLIT_VIEWS: usize = 5;

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct SplitManifest {
    pub seed: u64,
    pub total: usize,
    /// Sorted view indices.
    pub train: Vec<usize>,
    pub test: Vec<usize>,
}

impl SplitManifest {
    pub fn to_text(&self) -> String {
        let join = |ids: &[usize]| ids.iter().map(|i| i.to_string()).collect::<Vec<_>>().join(",");
        format!(
            "seed={}\ntotal={}\ntrain={}\ntest={}\n",
            self.seed,
            self.total,
            join(&self.train),
            join(&self.test)
        )
    }

    pub fn parse(text: &str, path: &Path) -> Result<Self> {
        let mut seed = None;
        let mut total = None;
        let mut train = None;
        let mut test = None;
        for (n, line) in text.lines().enumerate() {
            let line = line.trim();
            if line.is_empty() || line.starts_with('#') {
                continue;
            }
            let (key, value) = line
                .split_once('=')
                .ok_or_else(|| Error::parse(path, n + 1, "expected key=value"))?;
            let ids = |v: &str| -> Result<Vec<usize>> {
                v.split(',')
                    .filter(|s| !s.is_empty())
                    .map(|s| s.trim().parse().map_err(|_| Error::parse(path, n + 1, format!("bad view id {s:?}"))))
                    .collect()
            };
            match key.trim() {
                "seed" => seed = Some(value.trim().parse().map_err(|_| Error::parse(path, n + 1, "bad seed"))?),
                "total" => total = Some(value.trim().parse().map_err(|_| Error::parse(path, n + 1, "bad total"))?),
                "train" => train = Some(ids(value)?),
                "test" => test = Some(ids(value)?),
                other => return Err(Error::parse(path, n + 1, format!("unknown key {other:?}"))),
            }
        }
        let missing = |k: &str| Error::parse(path, 0, format!("missing {k}"));
        Ok(SplitManifest {
            seed: seed.ok_or_else(|| missing("seed"))?,
            total: total.ok_or_else(|| missing("total"))?,
            train: train.ok_or_else(|| missing("train"))?,
            test: test.ok_or_else(|| missing("test"))?,
        })
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        std::fs::write(path, self.to_text()).map_err(|e| Error::io(path, e))
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        Self::parse(&text, path)
    }
}

/// Seeded uniform split with `round(0.2 n)` test views.
pub fn split(n_views: usize, seed: u64) -> Result<SplitManifest> {
    if n_views < MIN_SPLIT_VIEWS {
        return Err(Error::TooFewViews {
            found: n_views,
            required: MIN_SPLIT_VIEWS,
        });
    }
    let n_test = (TEST_FRACTION * n_views as f64).round() as usize;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut test = rand::seq::index::sample(&mut rng, n_views, n_test).into_vec();
    test.sort_unstable();
    let train = (0..n_views).filter(|i| test.binary_search(i).is_err()).collect();
    Ok(SplitManifest {
        seed,
        total: n_views,
        train,
        test,
    })
}

fn check_shapes(a: &Image, b: &Image) -> Result<()> {
    if a.width != b.width || a.height != b.height {
        return Err(Error::ShapeMismatch(format!(
            "{}x{} vs {}x{}",
            a.width, a.height, b.width, b.height
        )));
    }
    if a.width * a.height == 0 {
        return Err(Error::ZeroPixels);
    }
    Ok(())
}

pub fn mse(a: &Image, b: &Image) -> Result<f64> {
    check_shapes(a, b)?;
    let sum: f64 = a.data.iter().zip(&b.data).map(|(x, y)| (x - y) * (x - y)).sum();
    Ok(sum / a.data.len() as f64)
}

/// Peak signal-to-noise ratio for unit peak. Identical images give `+inf`.
pub fn psnr(a: &Image, b: &Image) -> Result<f64> {
    let m = mse(a, b)?;
    Ok(if m == 0.0 { f64::INFINITY } else { -10.0 * m.log10() })
}

pub fn ssim(a: &Image, b: &Image) -> Result<f64> {
    check_shapes(a, b)?;
    Ok(ssim_with_grad(a, b, None, false)?.0)
}

#[derive(Debug, Clone, PartialEq)]
pub struct ViewScore {
    pub view_id: String,
    pub psnr: f64,
    pub ssim: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct EvalReport {
    pub scores: Vec<ViewScore>,
}

impl EvalReport {
    /// Scores `(id, rendered, target)` triples in parallel.
    pub fn compute(pairs: &[(String, Image, Image)]) -> Result<Self> {
        let scores = pairs
            .par_iter()
            .map(|(id, r, t)| {
                Ok(ViewScore {
                    view_id: id.clone(),
                    psnr: psnr(r, t)?,
                    ssim: ssim(r, t)?,
                })
            })
            .collect::<Result<_>>()?;
        Ok(EvalReport { scores })
    }

    pub fn mean_psnr(&self) -> f64 {
        mean(self.scores.iter().map(|s| s.psnr))
    }

    pub fn mean_ssim(&self) -> f64 {
        mean(self.scores.iter().map(|s| s.ssim))
    }

    /// `view_id,psnr,ssim` rows followed by a `mean` row.
    pub fn to_csv(&self) -> String {
        let mut out = String::from("view_id,psnr,ssim\n");
        for s in &self.scores {
            let _ = writeln!(out, "{},{:.6},{:.6}", s.view_id, s.psnr, s.ssim);
        }
        let _ = writeln!(out, "mean,{:.6},{:.6}", self.mean_psnr(), self.mean_ssim());
        out
    }

    pub fn save_csv(&self, path: &Path) -> Result<()> {
        std::fs::write(path, self.to_csv()).map_err(|e| Error::io(path, e))
    }
}

fn mean(values: impl Iterator<Item = f64>) -> f64 {
    let (sum, n) = values.fold((0.0, 0usize), |(s, n), v| (s + v, n + 1));
    if n == 0 { f64::NAN } else { sum / n as f64 }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn split_sizes() {
        let m = split(10, 3).unwrap();
        assert_eq!((m.train.len(), m.test.len()), (8, 2));
        let m = split(5, 3).unwrap();
        assert_eq!((m.train.len(), m.test.len()), (4, 1));
        assert!(matches!(split(4, 0), Err(Error::TooFewViews { .. })));
    }

    #[test]
    fn split_is_seeded_and_round_trips() {
        let a = split(23, 9).unwrap();
        assert_eq!(a, split(23, 9).unwrap());
        assert_eq!(SplitManifest::parse(&a.to_text(), Path::new("m")).unwrap(), a);
    }

    #[test]
    fn constant_offset_psnr_is_twenty() {
        let a = Image::filled(16, 16, [0.3; 3]);
        let b = Image::filled(16, 16, [0.4; 3]);
        assert!((psnr(&a, &b).unwrap() - 20.0).abs() < 1e-9);
        assert_eq!(psnr(&a, &a).unwrap(), f64::INFINITY);
        assert!((ssim(&a, &a).unwrap() - 1.0).abs() < 1e-12);
    }

    #[test]
    fn csv_has_summary_row() {
        let a = Image::filled(8, 8, [0.5; 3]);
        let b = Image::filled(8, 8, [0.6; 3]);
        let r = EvalReport::compute(&[("v0".into(), a, b)]).unwrap();
        let csv = r.to_csv();
        assert!(csv.starts_with("view_id,psnr,ssim\nv0,"));
        assert!(csv.trim_end().lines().last().unwrap().starts_with("mean,"));
    }
}
