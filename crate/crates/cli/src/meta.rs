//! Training metadata stored beside a weights file as `<weights>.meta`.

use std::fs;
use std::path::{Path, PathBuf};

use anyhow::{bail, Context, Result};
use signret::network::Variant;

use crate::config;

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Meta {
    pub qf: u32,
    pub variant: Variant,
    pub depth: usize,
    pub seed: u64,
}

pub fn path_for(weights: &Path) -> PathBuf {
    let mut name = weights.as_os_str().to_owned();
    name.push(".meta");
    PathBuf::from(name)
}

pub fn variant_name(v: Variant) -> &'static str {
    match v {
        Variant::Subband => "subband",
        Variant::Naive => "naive",
    }
}

impl Meta {
    pub fn write(&self, weights: &Path) -> Result<()> {
        let text = format!(
            "qf={}\nvariant={}\ndepth={}\nseed={}\n",
            self.qf,
            variant_name(self.variant),
            self.depth,
            self.seed
        );
        fs::write(path_for(weights), text).context("writing weights metadata")
    }

    /// `None` when no sidecar exists.
    pub fn read(weights: &Path) -> Result<Option<Self>> {
        let path = path_for(weights);
        if !path.exists() {
            return Ok(None);
        }
        let text =
            fs::read_to_string(&path).with_context(|| format!("reading {}", path.display()))?;
        let (mut qf, mut variant, mut depth, mut seed) = (None, None, None, None);
        for (k, v) in config::parse(&text)? {
            let bad = || format!("{}: bad value {v:?} for {k}", path.display());
            match k.as_str() {
                "qf" => qf = Some(v.parse().with_context(bad)?),
                "depth" => depth = Some(v.parse().with_context(bad)?),
                "seed" => seed = Some(v.parse().with_context(bad)?),
                "variant" => {
                    variant = Some(match v.as_str() {
                        "subband" => Variant::Subband,
                        "naive" => Variant::Naive,
                        _ => bail!(bad()),
                    })
                }
                _ => bail!("{}: unknown key {k}", path.display()),
            }
        }
        match (qf, variant, depth, seed) {
            (Some(qf), Some(variant), Some(depth), Some(seed)) => Ok(Some(Meta {
                qf,
                variant,
                depth,
                seed,
            })),
            _ => bail!("{}: incomplete metadata", path.display()),
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn round_trip() {
        let dir = tempfile::tempdir().unwrap();
        let w = dir.path().join("m.srw");
        assert_eq!(Meta::read(&w).unwrap(), None);
        let m = Meta {
            qf: 15,
            variant: Variant::Naive,
            depth: 3,
            seed: 9,
        };
        m.write(&w).unwrap();
        assert_eq!(path_for(&w), dir.path().join("m.srw.meta"));
        assert_eq!(Meta::read(&w).unwrap(), Some(m));
        fs::write(path_for(&w), "qf=15\n").unwrap();
        assert!(Meta::read(&w).is_err());
    }
}
