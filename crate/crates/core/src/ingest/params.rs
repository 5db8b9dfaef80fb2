//! The scene-parameter file: flat `key=value` lines.

use std::collections::BTreeMap;
use std::path::Path;

use nalgebra::Vector3;

use crate::error::{Error, Result};
use crate::model::SceneShell;

/// Where a value came from.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Provenance {
    Auto,
    User,
}

impl Provenance {
    fn as_str(self) -> &'static str {
        match self {
            Provenance::Auto => "auto",
            Provenance::User => "user",
        }
    }

    fn parse(s: &str) -> Option<Self> {
        match s {
            "auto" => Some(Provenance::Auto),
            "user" => Some(Provenance::User),
            _ => None,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SceneParams {
    pub center: Vector3<f64>,
    pub r_inner: f64,
    pub r_outer: f64,
    pub seed: u64,
    pub navigation_diameter: Option<f64>,
    /// Factor already applied to the SfM geometry, if any.
    pub scale: Option<f64>,
    pub center_source: Provenance,
    pub r_inner_source: Provenance,
    pub r_outer_source: Provenance,
    /// Unrecognized keys, preserved on rewrite.
    pub extra: BTreeMap<String, String>,
}

impl SceneParams {
    pub fn new(shell: SceneShell, seed: u64) -> Self {
        SceneParams {
            center: shell.center,
            r_inner: shell.r_inner,
            r_outer: shell.r_outer,
            seed,
            navigation_diameter: None,
            scale: None,
            center_source: Provenance::Auto,
            r_inner_source: Provenance::Auto,
            r_outer_source: Provenance::Auto,
            extra: BTreeMap::new(),
        }
    }

    pub fn shell(&self) -> Result<SceneShell> {
        SceneShell::new(self.center, self.r_inner, self.r_outer)
    }

    pub fn to_text(&self) -> String {
        let mut kv: Vec<(String, String)> = vec![
            ("center_x".into(), format!("{:?}", self.center.x)),
            ("center_y".into(), format!("{:?}", self.center.y)),
            ("center_z".into(), format!("{:?}", self.center.z)),
            ("r_inner".into(), format!("{}", self.r_inner)),
            ("r_outer".into(), format!("{}", self.r_outer)),
            ("seed".into(), self.seed.to_string()),
            ("center_source".into(), self.center_source.as_str().into()),
            ("r_inner_source".into(), self.r_inner_source.as_str().into()),
            ("r_outer_source".into(), self.r_outer_source.as_str().into()),
        ];
        if let Some(d) = self.navigation_diameter {
            kv.push(("navigation_diameter".into(), format!("{d}")));
        }
        if let Some(s) = self.scale {
            kv.push(("scale".into(), format!("{s:?}")));
        }
        kv.extend(self.extra.iter().map(|(k, v)| (k.clone(), v.clone())));
        kv.iter().map(|(k, v)| format!("{k}={v}\n")).collect()
    }

    pub fn parse(text: &str, path: &Path) -> Result<Self> {
        let mut map = BTreeMap::new();
        for (i, line) in text.lines().enumerate() {
            let line = line.trim();
            if line.is_empty() || line.starts_with('#') {
                continue;
            }
            let (k, v) = line
                .split_once('=')
                .ok_or_else(|| Error::parse(path, i + 1, "expected key=value"))?;
            map.insert(k.trim().to_string(), (i + 1, v.trim().to_string()));
        }
        let mut take = |key: &str| map.remove(key);
        fn num<T: std::str::FromStr>(path: &Path, key: &str, e: Option<(usize, String)>) -> Result<Option<T>> {
            match e {
                None => Ok(None),
                Some((line, v)) => v
                    .parse()
                    .map(Some)
                    .map_err(|_| Error::parse(path, line, format!("invalid value for `{key}`: `{v}`"))),
            }
        }
        let required = |key: &str, v: Option<f64>| {
            v.ok_or_else(|| Error::Config(format!("{}: missing required key `{key}`", path.display())))
        };
        let cx = required("center_x", num(path, "center_x", take("center_x"))?)?;
        let cy = required("center_y", num(path, "center_y", take("center_y"))?)?;
        let cz = required("center_z", num(path, "center_z", take("center_z"))?)?;
        let r_inner = required("r_inner", num(path, "r_inner", take("r_inner"))?)?;
        let r_outer = required("r_outer", num(path, "r_outer", take("r_outer"))?)?;
        let seed: u64 = num(path, "seed", take("seed"))?
            .ok_or_else(|| Error::Config(format!("{}: missing required key `seed`", path.display())))?;
        let navigation_diameter = num(path, "navigation_diameter", take("navigation_diameter"))?;
        let scale = num(path, "scale", take("scale"))?;
        let mut source = |key: &str| -> Result<Provenance> {
            match take(key) {
                None => Ok(Provenance::Auto),
                Some((line, v)) => Provenance::parse(&v)
                    .ok_or_else(|| Error::parse(path, line, format!("`{key}` must be auto or user"))),
            }
        };
        let center_source = source("center_source")?;
        let r_inner_source = source("r_inner_source")?;
        let r_outer_source = source("r_outer_source")?;
        let params = SceneParams {
            center: Vector3::new(cx, cy, cz),
            r_inner,
            r_outer,
            seed,
            navigation_diameter,
            scale,
            center_source,
            r_inner_source,
            r_outer_source,
            extra: map.into_iter().map(|(k, (_, v))| (k, v)).collect(),
        };
        params.shell()?;
        Ok(params)
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        Self::parse(&text, path)
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        std::fs::write(path, self.to_text()).map_err(|e| Error::io(path, e))
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn round_trip() {
        let mut p = SceneParams::new(SceneShell::new(Vector3::new(0.1, -2.0, 3.0), 10.0, 40.0).unwrap(), 7);
        p.scale = Some(2.0);
        p.r_inner_source = Provenance::User;
        p.extra.insert("note".into(), "synthetic".into());
        let q = SceneParams::parse(&p.to_text(), Path::new("x")).unwrap();
        assert_eq!(p, q);
        assert!(p.to_text().contains("r_inner=10\n"));
    }

    #[test]
    fn missing_seed_is_an_error() {
        let text = "center_x=0\ncenter_y=0\ncenter_z=0\nr_inner=1\nr_outer=2\n";
        assert!(matches!(SceneParams::parse(text, Path::new("x")), Err(Error::Config(_))));
    }

    #[test]
    fn invalid_shell_is_rejected() {
        let text = "center_x=0\ncenter_y=0\ncenter_z=0\nr_inner=3\nr_outer=2\nseed=0\n";
        assert!(matches!(SceneParams::parse(text, Path::new("x")), Err(Error::InvalidShell { .. })));
    }
}
