use std::collections::HashSet;
use std::fmt;
use std::io::{BufRead, Write};
use std::str::FromStr;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::{kl_divergence, l1_distance, total_divergence_to_mean, ConfusionTable, LogBase, SparseDistribution};
use crate::corpus::{ObjectId, Vocabulary};
use crate::error::{Error, Result};

/// Similarity measure used to pick and weight neighbors.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Measure {
    /// KL divergence `D(x || x')`, weight `10^(-beta D)`.
    Kl,
    /// Total divergence to the mean `A(x,x')`, weight `10^(-beta A)`.
    #[serde(rename = "avg")]
    TotalDivergence,
    /// `L1(x,x')`, weight `(2 - L1)^beta`.
    L1,
    /// Confusion probability `P_C(x'|x)`, used directly as the weight.
    #[serde(rename = "conf")]
    Confusion,
}

impl Measure {
    pub const ALL: [Measure; 4] = [Measure::Kl, Measure::TotalDivergence, Measure::L1, Measure::Confusion];

    pub fn tag(self) -> &'static str {
        match self {
            Measure::Kl => "kl",
            Measure::TotalDivergence => "avg",
            Measure::L1 => "l1",
            Measure::Confusion => "conf",
        }
    }

    /// KL needs smoothed neighbor rows; the others are defined on MLE rows.
    pub fn needs_smoothed_base(self) -> bool {
        matches!(self, Measure::Kl)
    }

    /// Maps the raw value of the measure onto an ascending distance.
    /// Confusion probability is a similarity, so its distance is `1 - P_C`.
    pub fn distance_of(self, raw: f64) -> f64 {
        match self {
            Measure::Confusion => 1.0 - raw,
            _ => raw,
        }
    }
}

impl fmt::Display for Measure {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.tag())
    }
}

impl FromStr for Measure {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "kl" => Ok(Measure::Kl),
            "avg" | "a" => Ok(Measure::TotalDivergence),
            "l1" => Ok(Measure::L1),
            "conf" | "confusion" => Ok(Measure::Confusion),
            other => Err(Error::InvalidParameter(format!("unknown measure tag {other:?}"))),
        }
    }
}

/// Weight of a neighbor given the raw value of `measure` (a distance, or
/// `P_C` for confusion). `beta` is ignored for confusion.
pub fn weight(measure: Measure, raw: f64, beta: f64) -> f64 {
    match measure {
        Measure::Kl | Measure::TotalDivergence => {
            if raw.is_infinite() {
                0.0
            } else {
                10f64.powf(-beta * raw)
            }
        }
        Measure::L1 => (2.0 - raw).max(0.0).powf(beta),
        Measure::Confusion => raw,
    }
}

/// Truncation and weighting parameters of a neighbor graph.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct NeighborParams {
    pub measure: Measure,
    /// Maximum neighbors per object.
    pub k: usize,
    /// Only neighbors at distance strictly below `threshold` are kept.
    #[serde(with = "crate::serde_float")]
    pub threshold: f64,
    pub beta: f64,
    pub log_base: LogBase,
}

impl NeighborParams {
    /// Every other object, unweighted by distance threshold.
    pub fn unrestricted(measure: Measure, num_objects: usize, beta: f64) -> Self {
        NeighborParams {
            measure,
            k: num_objects,
            threshold: f64::INFINITY,
            beta,
            log_base: LogBase::TEN,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.threshold > 0.0) {
            return Err(Error::InvalidParameter(format!(
                "distance threshold must be positive, got {}",
                self.threshold
            )));
        }
        if self.measure != Measure::Confusion && !(self.beta > 0.0 && self.beta.is_finite()) {
            return Err(Error::InvalidParameter(format!(
                "beta must be positive and finite, got {}",
                self.beta
            )));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Neighbor {
    pub id: ObjectId,
    pub distance: f64,
    pub weight: f64,
}

/// What neighbors are computed from.
#[derive(Debug, Clone, Copy)]
pub enum NeighborSpace<'a> {
    /// Per-object distributions indexed by object id; `None` marks unusable objects.
    Distributions(&'a [Option<SparseDistribution>]),
    Confusion(&'a ConfusionTable),
}

impl NeighborSpace<'_> {
    pub fn num_objects(&self) -> usize {
        match self {
            NeighborSpace::Distributions(rows) => rows.len(),
            NeighborSpace::Confusion(t) => t.num_objects(),
        }
    }

    pub fn is_defined(&self, x: ObjectId) -> bool {
        match self {
            NeighborSpace::Distributions(rows) => rows.get(x.index()).is_some_and(Option::is_some),
            NeighborSpace::Confusion(t) => t.is_defined(x),
        }
    }

    fn check_measure(&self, measure: Measure) -> Result<()> {
        match (self, measure) {
            (NeighborSpace::Confusion(_), Measure::Confusion) => Ok(()),
            (NeighborSpace::Distributions(_), m) if m != Measure::Confusion => Ok(()),
            _ => Err(Error::InvalidParameter(format!(
                "measure {measure} does not match the neighbor space"
            ))),
        }
    }
}

/// The at most `k` objects nearest to `x` with distance below the threshold,
/// excluding `x`, sorted by ascending distance with ties broken by id.
pub fn nearest_neighbors(space: NeighborSpace<'_>, x: ObjectId, params: &NeighborParams) -> Result<Vec<Neighbor>> {
    params.validate()?;
    space.check_measure(params.measure)?;
    if x.index() >= space.num_objects() {
        return Err(Error::UnknownObject(x.0));
    }
    if !space.is_defined(x) {
        return Err(Error::ZeroMarginal(x.0));
    }
    if params.k == 0 {
        return Ok(Vec::new());
    }
    let mut out: Vec<Neighbor> = match space {
        NeighborSpace::Distributions(rows) => {
            let q = rows[x.index()].as_ref().expect("checked above");
            rows.iter()
                .enumerate()
                .filter(|&(i, r)| i != x.index() && r.is_some())
                .filter_map(|(i, r)| {
                    let r = r.as_ref().expect("filtered");
                    let raw = match params.measure {
                        Measure::Kl => kl_divergence(q, r, params.log_base),
                        Measure::TotalDivergence => total_divergence_to_mean(q, r, params.log_base),
                        Measure::L1 => l1_distance(q, r),
                        Measure::Confusion => unreachable!("checked above"),
                    };
                    let distance = params.measure.distance_of(raw);
                    (distance < params.threshold).then(|| Neighbor {
                        id: ObjectId(i as u32),
                        distance,
                        weight: weight(params.measure, raw, params.beta),
                    })
                })
                .collect()
        }
        NeighborSpace::Confusion(table) => table
            .row(x)
            .iter()
            .filter(|&&(o, _)| o != x)
            .filter_map(|&(o, p)| {
                let distance = Measure::Confusion.distance_of(p);
                (distance < params.threshold).then_some(Neighbor {
                    id: o,
                    distance,
                    weight: p,
                })
            })
            .collect(),
    };
    out.sort_by(|a, b| a.distance.total_cmp(&b.distance).then(a.id.cmp(&b.id)));
    out.truncate(params.k);
    Ok(out)
}

/// Ranked neighbor lists for every object.
#[derive(Debug, Clone, PartialEq)]
pub struct NeighborGraph {
    pub params: NeighborParams,
    rows: Vec<Vec<Neighbor>>,
}

const GRAPH_MAGIC: &str = "#distsim-neighbors";
const GRAPH_VERSION: &str = "v1";

impl NeighborGraph {
    /// Computes every row independently, in parallel. Rows of undefined objects are empty.
    pub fn build(space: NeighborSpace<'_>, params: NeighborParams) -> Result<Self> {
        params.validate()?;
        space.check_measure(params.measure)?;
        let rows = (0..space.num_objects() as u32)
            .into_par_iter()
            .map(|x| {
                let x = ObjectId(x);
                if space.is_defined(x) {
                    nearest_neighbors(space, x, &params)
                } else {
                    Ok(Vec::new())
                }
            })
            .collect::<Result<Vec<_>>>()?;
        Ok(NeighborGraph { params, rows })
    }

    pub fn from_rows(params: NeighborParams, rows: Vec<Vec<Neighbor>>) -> Self {
        NeighborGraph { params, rows }
    }

    pub fn num_objects(&self) -> usize {
        self.rows.len()
    }

    /// A tighter graph derived from this one without recomputing distances:
    /// rows are cut to `k` neighbors below `threshold` and reweighted with `beta`.
    /// Only valid when `k` and `threshold` do not exceed this graph's.
    pub fn restrict(&self, k: usize, threshold: f64, beta: f64) -> Result<NeighborGraph> {
        let params = NeighborParams {
            k,
            threshold,
            beta,
            ..self.params
        };
        params.validate()?;
        if k > self.params.k || threshold > self.params.threshold {
            return Err(Error::InvalidParameter(format!(
                "cannot widen a graph built with k={} t={} to k={k} t={threshold}",
                self.params.k, self.params.threshold
            )));
        }
        let measure = params.measure;
        let rows = self
            .rows
            .iter()
            .map(|row| {
                row.iter()
                    .filter(|n| n.distance < threshold)
                    .take(k)
                    .map(|n| Neighbor {
                        weight: match measure {
                            Measure::Confusion => n.weight,
                            m => weight(m, n.distance, beta),
                        },
                        ..*n
                    })
                    .collect()
            })
            .collect();
        Ok(NeighborGraph { params, rows })
    }

    pub fn row(&self, x: ObjectId) -> &[Neighbor] {
        self.rows.get(x.index()).map(Vec::as_slice).unwrap_or(&[])
    }

    /// Writes the tab-separated graph file. Only objects defined in `defined` get a line.
    pub fn write<W: Write>(&self, mut out: W, objects: &Vocabulary, defined: impl Fn(ObjectId) -> bool) -> Result<()> {
        let p = &self.params;
        writeln!(
            out,
            "{GRAPH_MAGIC}\t{GRAPH_VERSION}\tmeasure={}\tk={}\tt={}\tbeta={}\tln_base={}",
            p.measure,
            p.k,
            p.threshold,
            p.beta,
            p.log_base.ln_base()
        )?;
        for (x, row) in self.rows.iter().enumerate() {
            let x = ObjectId(x as u32);
            if !defined(x) {
                continue;
            }
            write!(out, "{}", objects.surface(x.0))?;
            for n in row {
                write!(out, "\t{}\t{}\t{}", objects.surface(n.id.0), n.distance, n.weight)?;
            }
            writeln!(out)?;
        }
        Ok(())
    }

    pub fn to_bytes(&self, objects: &Vocabulary, defined: impl Fn(ObjectId) -> bool) -> Vec<u8> {
        let mut buf = Vec::new();
        self.write(&mut buf, objects, defined).expect("in-memory write");
        buf
    }

    pub fn read<R: BufRead>(input: R, objects: &Vocabulary) -> Result<Self> {
        let mut lines = input.lines();
        let header = lines
            .next()
            .ok_or_else(|| Error::Format("empty neighbor file".into()))??;
        let params = parse_header(&header)?;
        let mut rows = vec![Vec::new(); objects.len()];
        for (i, line) in lines.enumerate() {
            let line = line?;
            let lineno = i + 2;
            if line.is_empty() {
                continue;
            }
            let fields: Vec<&str> = line.split('\t').collect();
            if !(fields.len() - 1).is_multiple_of(3) {
                return Err(Error::MalformedLine {
                    line: lineno,
                    reason: "expected object followed by (neighbor, distance, weight) triples".into(),
                });
            }
            let lookup = |s: &str| {
                objects
                    .get(s)
                    .map(ObjectId)
                    .ok_or_else(|| Error::UnknownWord(s.to_string()))
            };
            let x = lookup(fields[0])?;
            let parse = |s: &str| {
                s.parse::<f64>().map_err(|e| Error::MalformedLine {
                    line: lineno,
                    reason: format!("bad number {s:?}: {e}"),
                })
            };
            let mut row = Vec::with_capacity(fields.len() / 3);
            for t in fields[1..].chunks(3) {
                row.push(Neighbor {
                    id: lookup(t[0])?,
                    distance: parse(t[1])?,
                    weight: parse(t[2])?,
                });
            }
            rows[x.index()] = row;
        }
        Ok(NeighborGraph { params, rows })
    }
}

fn parse_header(header: &str) -> Result<NeighborParams> {
    let fields: Vec<&str> = header.split('\t').collect();
    if fields.len() != 7 || fields[0] != GRAPH_MAGIC || fields[1] != GRAPH_VERSION {
        return Err(Error::Format(format!("unrecognized neighbor file header {header:?}")));
    }
    let value = |key: &str, field: &str| -> Result<String> {
        field
            .strip_prefix(key)
            .and_then(|s| s.strip_prefix('='))
            .map(str::to_string)
            .ok_or_else(|| Error::Format(format!("expected {key}=..., found {field:?}")))
    };
    let num = |key: &str, field: &str| -> Result<f64> {
        value(key, field)?
            .parse()
            .map_err(|_| Error::Format(format!("bad value in {field:?}")))
    };
    let k = value("k", fields[3])?
        .parse()
        .map_err(|_| Error::Format(format!("bad value in {:?}", fields[3])))?;
    let ln_base = num("ln_base", fields[6])?;
    Ok(NeighborParams {
        measure: value("measure", fields[2])?.parse()?,
        k,
        threshold: num("t", fields[4])?,
        beta: num("beta", fields[5])?,
        log_base: LogBase::from_ln(ln_base)?,
    })
}

/// Jaccard overlap of the top-`m` neighbor id sets of two rows.
pub fn top_overlap(a: &[Neighbor], b: &[Neighbor], m: usize) -> f64 {
    let sa: HashSet<ObjectId> = a.iter().take(m).map(|n| n.id).collect();
    let sb: HashSet<ObjectId> = b.iter().take(m).map(|n| n.id).collect();
    let union = sa.union(&sb).count();
    if union == 0 {
        return 1.0;
    }
    sa.intersection(&sb).count() as f64 / union as f64
}
