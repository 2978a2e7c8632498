//! Chain serialization.
//!
//! CSV layout: two `#` comment lines (a magic line and a JSON metadata line
//! holding the model spec, the sampler configuration and the draw count),
//! a header row, then one row per stored draw. Columns are the static
//! parameters, `kappa` for the years `t1 - 1 ..= tn` (the first entry is
//! `phi_0`), and for cohort models the cohort factor for years of birth
//! `t1 - 1 - xp ..= tn - x1`.

use std::io::{BufRead, Write};

use serde::{Deserialize, Serialize};

use super::{Draw, PosteriorChain, SamplerConfig};
use crate::error::{Error, Result};
use crate::model::{ModelKind, ModelSpec, StatePath, StaticParams};

const MAGIC: &str = "# stochmort posterior chain v1";
const META_PREFIX: &str = "# meta: ";

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
struct ChainMeta {
    spec: ModelSpec,
    config: SamplerConfig,
    draws: usize,
}

/// Flat form of one draw shared by the CSV and JSON encodings.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DrawRecord {
    pub params: StaticParams,
    /// `kappa_0 ..= kappa_n`.
    pub kappa: Vec<f64>,
    /// Cohort factor for `t1 - 1 - xp ..= tn - x1`; absent for Lee-Carter.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub cohorts: Option<Vec<f64>>,
}

impl DrawRecord {
    pub fn from_draw(draw: &Draw, spec: &ModelSpec) -> Result<Self> {
        let cohorts = if spec.kind.has_cohort() {
            Some(draw.path.all_cohort_values(&spec.window)?)
        } else {
            None
        };
        Ok(DrawRecord {
            params: draw.params.clone(),
            kappa: draw.path.kappas().collect(),
            cohorts,
        })
    }

    pub fn into_draw(self, spec: &ModelSpec) -> Result<Draw> {
        self.params.check_shape(spec)?;
        let path = match &self.cohorts {
            Some(c) if spec.kind.has_cohort() => StatePath::from_factors(&spec.window, &self.kappa, c)?,
            None if !spec.kind.has_cohort() => {
                if self.kappa.len() != spec.n_years() + 1 {
                    return Err(Error::DimensionMismatch(format!(
                        "expected {} kappa values, got {}",
                        spec.n_years() + 1,
                        self.kappa.len()
                    )));
                }
                StatePath::from_kappa(&self.kappa)
            }
            _ => {
                return Err(Error::DimensionMismatch(
                    "cohort values do not match the model kind".into(),
                ))
            }
        };
        Ok(Draw {
            params: self.params,
            path,
        })
    }
}

fn columns(spec: &ModelSpec) -> Vec<String> {
    let w = &spec.window;
    let mut cols = vec!["draw".to_string()];
    cols.extend(w.ages().map(|a| format!("alpha[{a}]")));
    cols.extend(w.ages().map(|a| format!("beta[{a}]")));
    if spec.kind == ModelKind::FullCohort {
        cols.extend(w.ages().map(|a| format!("beta_gamma[{a}]")));
    }
    cols.push("theta".into());
    if spec.kind.has_cohort() {
        cols.extend(["eta".into(), "lambda".into()]);
    }
    cols.extend(["sigma2_eps".into(), "sigma2_kappa".into()]);
    if spec.kind.has_cohort() {
        cols.push("sigma2_gamma".into());
    }
    cols.extend((w.first_year() - 1..=w.last_year()).map(|y| format!("kappa[{y}]")));
    if spec.kind.has_cohort() {
        cols.extend((w.first_cohort() - 1..=w.last_cohort()).map(|c| format!("gamma[{c}]")));
    }
    cols
}

fn record_values(rec: &DrawRecord) -> Vec<f64> {
    let p = &rec.params;
    let mut v = Vec::new();
    v.extend(&p.alpha);
    v.extend(&p.beta);
    v.extend(p.beta_gamma.iter().flatten());
    v.push(p.theta);
    v.extend(p.eta.iter().chain(p.lambda.iter()));
    v.extend([p.sigma2_eps, p.sigma2_kappa]);
    v.extend(p.sigma2_gamma.iter());
    v.extend(&rec.kappa);
    v.extend(rec.cohorts.iter().flatten());
    v
}

fn record_from_values(spec: &ModelSpec, vals: &[f64]) -> DrawRecord {
    let (p, n) = (spec.n_ages(), spec.n_years());
    let mut it = vals.iter().copied();
    let mut take = |k: usize| -> Vec<f64> { it.by_ref().take(k).collect() };
    let alpha = take(p);
    let beta = take(p);
    let beta_gamma = (spec.kind == ModelKind::FullCohort).then(|| take(p));
    let theta = take(1)[0];
    let (eta, lambda) = if spec.kind.has_cohort() {
        let v = take(2);
        (Some(v[0]), Some(v[1]))
    } else {
        (None, None)
    };
    let s = take(2);
    let sigma2_gamma = spec.kind.has_cohort().then(|| take(1)[0]);
    let kappa = take(n + 1);
    let cohorts = spec.kind.has_cohort().then(|| take(n + p));
    DrawRecord {
        params: StaticParams {
            alpha,
            beta,
            beta_gamma,
            theta,
            eta,
            lambda,
            sigma2_eps: s[0],
            sigma2_kappa: s[1],
            sigma2_gamma,
        },
        kappa,
        cohorts,
    }
}

pub fn write_chain_csv<W: Write>(chain: &PosteriorChain, mut out: W) -> Result<()> {
    let io = |e| Error::io("chain", e);
    let meta = ChainMeta {
        spec: chain.spec,
        config: chain.config.clone(),
        draws: chain.len(),
    };
    writeln!(out, "{MAGIC}").map_err(io)?;
    writeln!(
        out,
        "{META_PREFIX}{}",
        serde_json::to_string(&meta).expect("metadata serializes")
    )
    .map_err(io)?;
    writeln!(out, "{}", columns(&chain.spec).join(",")).map_err(io)?;
    for (k, draw) in chain.draws.iter().enumerate() {
        let rec = DrawRecord::from_draw(draw, &chain.spec)?;
        let mut line = k.to_string();
        for v in record_values(&rec) {
            line.push(',');
            line.push_str(&format!("{v:?}"));
        }
        writeln!(out, "{line}").map_err(io)?;
    }
    out.flush().map_err(io)
}

/// Reads a chain written by [`write_chain_csv`]. `source` names the input
/// in error messages.
pub fn read_chain_csv<R: BufRead>(input: R, source: &str) -> Result<PosteriorChain> {
    let parse_err = |line: usize, message: String| Error::Parse {
        path: source.to_string(),
        line,
        message,
    };
    let mut lines = input.lines().enumerate();
    let mut next_line = |what: &str| -> Result<(usize, String)> {
        match lines.next() {
            Some((i, Ok(l))) => Ok((i + 1, l)),
            Some((i, Err(e))) => Err(parse_err(i + 1, e.to_string())),
            None => Err(parse_err(0, format!("unexpected end of file, expected {what}"))),
        }
    };

    let (ln, magic) = next_line("header")?;
    if magic.trim_end() != MAGIC {
        return Err(parse_err(ln, "not a posterior chain file".into()));
    }
    let (ln, meta_line) = next_line("metadata")?;
    let meta: ChainMeta = meta_line
        .strip_prefix(META_PREFIX)
        .ok_or_else(|| parse_err(ln, "missing metadata line".into()))
        .and_then(|s| serde_json::from_str(s).map_err(|e| parse_err(ln, e.to_string())))?;
    let spec = meta.spec;
    let cols = columns(&spec);
    let (ln, header) = next_line("column header")?;
    if header.trim_end() != cols.join(",") {
        return Err(parse_err(ln, "column header does not match the model".into()));
    }

    let mut draws = Vec::with_capacity(meta.draws);
    while let Ok((ln, line)) = next_line("draw") {
        if line.trim().is_empty() {
            continue;
        }
        let fields: Vec<&str> = line.trim_end().split(',').collect();
        if fields.len() != cols.len() {
            return Err(parse_err(
                ln,
                format!("expected {} fields, found {}", cols.len(), fields.len()),
            ));
        }
        let vals = fields[1..]
            .iter()
            .map(|f| f.parse::<f64>())
            .collect::<std::result::Result<Vec<_>, _>>()
            .map_err(|e| parse_err(ln, e.to_string()))?;
        let draw = record_from_values(&spec, &vals)
            .into_draw(&spec)
            .map_err(|e| parse_err(ln, e.to_string()))?;
        draws.push(draw);
    }
    if draws.len() != meta.draws {
        return Err(Error::Data(format!(
            "{source}: truncated chain, expected {} draws but found {}",
            meta.draws,
            draws.len()
        )));
    }
    Ok(PosteriorChain {
        spec,
        config: meta.config,
        draws,
    })
}

#[derive(Serialize, Deserialize)]
struct ChainJson {
    spec: ModelSpec,
    config: SamplerConfig,
    draws: Vec<DrawRecord>,
}

pub fn write_chain_json<W: Write>(chain: &PosteriorChain, out: W) -> Result<()> {
    let doc = ChainJson {
        spec: chain.spec,
        config: chain.config.clone(),
        draws: chain
            .draws
            .iter()
            .map(|d| DrawRecord::from_draw(d, &chain.spec))
            .collect::<Result<_>>()?,
    };
    serde_json::to_writer(out, &doc).map_err(|source| Error::Json {
        path: "chain".into(),
        source,
    })
}

pub fn read_chain_json<R: std::io::Read>(input: R, source: &str) -> Result<PosteriorChain> {
    let doc: ChainJson = serde_json::from_reader(input).map_err(|e| Error::Json {
        path: source.into(),
        source: e,
    })?;
    let spec = doc.spec;
    let draws = doc
        .draws
        .into_iter()
        .map(|r| r.into_draw(&spec))
        .collect::<Result<_>>()?;
    Ok(PosteriorChain {
        spec,
        config: doc.config,
        draws,
    })
}
