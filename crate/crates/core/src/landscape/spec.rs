//! Landscape specifications and their flat `key = value` form.

use std::str::FromStr;

use crate::error::{Error, Result};
use crate::landscape::{
    CanonicalCubicSpec, Landscape, MlpSpec, NoiseSubspace, ThirdFormScheme,
};
use crate::scalar::Real;

#[derive(Clone, Debug, PartialEq)]
pub enum LandscapeSpec {
    Canonical(CanonicalCubicSpec),
    Mlp(MlpSpec),
}

fn parse<V: FromStr>(key: &str, value: &str) -> Result<V> {
    value
        .parse()
        .map_err(|_| Error::invalid(format!("cannot parse `{key} = {value}`")))
}

impl LandscapeSpec {
    pub fn kind(&self) -> &'static str {
        match self {
            LandscapeSpec::Canonical(_) => "canonical",
            LandscapeSpec::Mlp(_) => "mlp",
        }
    }

    pub fn dim(&self) -> usize {
        match self {
            LandscapeSpec::Canonical(s) => s.dim(),
            LandscapeSpec::Mlp(s) => s.dim(),
        }
    }

    pub fn build<T: Real>(&self) -> Result<Box<dyn Landscape<T>>> {
        Ok(match self {
            LandscapeSpec::Canonical(s) => Box::new(s.build::<T>()?),
            LandscapeSpec::Mlp(s) => Box::new(s.build::<T>()?),
        })
    }

    /// Key/value pairs, `kind` first. Floats use the shortest representation
    /// that parses back to the same value.
    pub fn to_pairs(&self) -> Vec<(&'static str, String)> {
        let mut out = vec![("kind", self.kind().to_string())];
        match self {
            LandscapeSpec::Canonical(s) => out.extend([
                ("h0", s.h0.to_string()),
                ("alpha0", s.alpha0.to_string()),
                ("rho", s.rho.to_string()),
                ("lam", s.lam.to_string()),
                ("k_bulk", s.k_bulk.to_string()),
                ("noise_cov_scale", s.noise_cov_scale.to_string()),
                ("coupling", s.coupling.to_string()),
                ("mu", s.mu.to_string()),
                ("n_samples", s.n_samples.to_string()),
                ("noise_subspace", s.noise_subspace.name().to_string()),
                ("data_seed", s.data_seed.to_string()),
            ]),
            LandscapeSpec::Mlp(s) => out.extend([
                ("input", s.input.to_string()),
                ("hidden", s.hidden.to_string()),
                ("output", s.output.to_string()),
                ("n_samples", s.n_samples.to_string()),
                ("data_seed", s.data_seed.to_string()),
                ("init_seed", s.init_seed.to_string()),
                ("teacher_scale", s.teacher_scale.to_string()),
                ("init_scale", s.init_scale.to_string()),
                ("hvp_rel_step", s.hvp_rel_step.to_string()),
                ("third_rel_step", s.third_rel_step.to_string()),
                ("third_scheme", s.third_scheme.name().to_string()),
            ]),
        }
        out
    }

    /// Inverse of [`to_pairs`](Self::to_pairs). Missing keys take their
    /// defaults; unknown keys are rejected.
    pub fn from_pairs<K: AsRef<str>, V: AsRef<str>>(pairs: &[(K, V)]) -> Result<Self> {
        let kind = pairs
            .iter()
            .find(|(k, _)| k.as_ref() == "kind")
            .map(|(_, v)| v.as_ref())
            .unwrap_or("canonical");
        match kind {
            "canonical" => {
                let mut s = CanonicalCubicSpec::default();
                for (k, v) in pairs {
                    let (k, v) = (k.as_ref(), v.as_ref());
                    match k {
                        "kind" => {}
                        "h0" => s.h0 = parse(k, v)?,
                        "alpha0" => s.alpha0 = parse(k, v)?,
                        "rho" => s.rho = parse(k, v)?,
                        "lam" => s.lam = parse(k, v)?,
                        "k_bulk" => s.k_bulk = parse(k, v)?,
                        "noise_cov_scale" => s.noise_cov_scale = parse(k, v)?,
                        "coupling" => s.coupling = parse(k, v)?,
                        "mu" => s.mu = parse(k, v)?,
                        "n_samples" => s.n_samples = parse(k, v)?,
                        "noise_subspace" => {
                            s.noise_subspace = NoiseSubspace::from_name(v)
                                .ok_or_else(|| Error::invalid(format!("unknown noise_subspace `{v}`")))?
                        }
                        "data_seed" => s.data_seed = parse(k, v)?,
                        _ => return Err(Error::invalid(format!("unknown canonical landscape key `{k}`"))),
                    }
                }
                s.validate()?;
                Ok(LandscapeSpec::Canonical(s))
            }
            "mlp" => {
                let mut s = MlpSpec::default();
                for (k, v) in pairs {
                    let (k, v) = (k.as_ref(), v.as_ref());
                    match k {
                        "kind" => {}
                        "input" => s.input = parse(k, v)?,
                        "hidden" => s.hidden = parse(k, v)?,
                        "output" => s.output = parse(k, v)?,
                        "n_samples" => s.n_samples = parse(k, v)?,
                        "data_seed" => s.data_seed = parse(k, v)?,
                        "init_seed" => s.init_seed = parse(k, v)?,
                        "teacher_scale" => s.teacher_scale = parse(k, v)?,
                        "init_scale" => s.init_scale = parse(k, v)?,
                        "hvp_rel_step" => s.hvp_rel_step = parse(k, v)?,
                        "third_rel_step" => s.third_rel_step = parse(k, v)?,
                        "third_scheme" => {
                            s.third_scheme = ThirdFormScheme::from_name(v)
                                .ok_or_else(|| Error::invalid(format!("unknown third_scheme `{v}`")))?
                        }
                        _ => return Err(Error::invalid(format!("unknown mlp landscape key `{k}`"))),
                    }
                }
                s.validate()?;
                Ok(LandscapeSpec::Mlp(s))
            }
            other => Err(Error::invalid(format!("unknown landscape kind `{other}`"))),
        }
    }
}
