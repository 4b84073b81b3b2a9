//! JSON, DOT and CSV formats.
//!
//! Rationals are written as canonical `"p/q"` strings (`"p"` when integral).
//! Field order is fixed by the DTO declarations, so output is byte-stable.

use std::fmt::Write as _;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::complex::{
    flatten, BendingTriple, ComplexError, EdgeClass, FrameLink, GappedEdge, SegmentComplex, Thread, ThreadBody,
};
use crate::curveflat::CfTrace;
use crate::distortion::{DistortionError, DistortionPL};
use crate::lipquot::{ComplexMap, Constant, LipschitzQuotientReport};
use crate::metric::{DistMatrix, MetricError, PseudometricSpace};
use crate::rational::{fmt_q, parse_q, ParseRationalError, Q};

#[derive(Debug, Error)]
pub enum IoError {
    #[error("json: {0}")]
    Json(#[from] serde_json::Error),
    #[error(transparent)]
    Rational(#[from] ParseRationalError),
    #[error(transparent)]
    Metric(#[from] MetricError),
    #[error(transparent)]
    Complex(#[from] ComplexError),
    #[error(transparent)]
    Distortion(#[from] DistortionError),
    #[error("csv: {0}")]
    Csv(#[from] csv::Error),
    #[error("{0}")]
    Shape(String),
}

/// A rational on the wire.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(transparent)]
pub struct QStr(pub String);

impl QStr {
    pub fn of(v: &Q) -> Self {
        QStr(fmt_q(v))
    }

    pub fn value(&self) -> Result<Q, IoError> {
        Ok(parse_q(&self.0)?)
    }
}

fn matrix_json(m: &DistMatrix) -> Vec<Vec<QStr>> {
    (0..m.len()).map(|i| m.row(i).iter().map(QStr::of).collect()).collect()
}

fn matrix_from_json(rows: &[Vec<QStr>]) -> Result<DistMatrix, IoError> {
    let rows = rows
        .iter()
        .map(|r| r.iter().map(QStr::value).collect::<Result<Vec<_>, _>>())
        .collect::<Result<Vec<_>, _>>()?;
    Ok(DistMatrix::from_rows(rows)?)
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct SpaceJson {
    pub points: Vec<String>,
    pub dist: Vec<Vec<QStr>>,
}

impl SpaceJson {
    pub fn of(s: &PseudometricSpace) -> Self {
        Self {
            points: s.labels().to_vec(),
            dist: matrix_json(s.dist()),
        }
    }

    pub fn to_space(&self) -> Result<PseudometricSpace, IoError> {
        Ok(PseudometricSpace::new(self.points.clone(), matrix_from_json(&self.dist)?)?)
    }
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct DistortionJson {
    pub breakpoints: Vec<[QStr; 2]>,
    pub s0: QStr,
}

impl DistortionJson {
    pub fn of(w: &DistortionPL) -> Self {
        Self {
            breakpoints: w.breakpoints().iter().map(|(t, v)| [QStr::of(t), QStr::of(v)]).collect(),
            s0: QStr::of(w.steepness()),
        }
    }

    pub fn to_distortion(&self) -> Result<DistortionPL, IoError> {
        let bps = self
            .breakpoints
            .iter()
            .map(|[t, v]| Ok((t.value()?, v.value()?)))
            .collect::<Result<Vec<_>, IoError>>()?;
        Ok(DistortionPL::new(bps, self.s0.value()?)?)
    }
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct EdgeJson {
    pub l: QStr,
    pub g: QStr,
    pub samples: usize,
}

#[derive(Clone, Debug, Serialize, Deserialize)]
#[serde(untagged)]
pub enum BodyJson {
    GappedEdge { gapped_edge: EdgeJson },
    Complex { complex: Box<ComplexJson>, boundary: Vec<usize> },
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct ThreadJson {
    pub anchors: Vec<usize>,
    pub body: BodyJson,
    #[serde(default, skip_serializing_if = "std::ops::Not::not")]
    pub wedge: bool,
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct TripleJson {
    pub x: usize,
    pub y: usize,
    pub a: QStr,
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct LinkJson {
    pub a: usize,
    pub b: usize,
    pub length: QStr,
}

fn yes() -> bool {
    true
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct ComplexJson {
    pub frame: SpaceJson,
    #[serde(default)]
    pub threads: Vec<ThreadJson>,
    #[serde(default)]
    pub collapsed: Vec<TripleJson>,
    #[serde(default = "yes")]
    pub p1u: bool,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub links: Vec<LinkJson>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub restore_stage: Option<usize>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub base: Option<Vec<Vec<QStr>>>,
}

fn pair(v: &[usize], what: &str) -> Result<(usize, usize), IoError> {
    match v {
        [a] => Ok((*a, *a)),
        [a, b] => Ok((*a, *b)),
        _ => Err(IoError::Shape(format!("{what} must list 1 or 2 indices, got {}", v.len()))),
    }
}

impl ComplexJson {
    pub fn of(cx: &SegmentComplex) -> Self {
        Self {
            frame: SpaceJson::of(&cx.frame),
            threads: cx
                .threads
                .iter()
                .map(|t| {
                    let anchors = if t.wedge {
                        vec![t.anchors.0]
                    } else {
                        vec![t.anchors.0, t.anchors.1]
                    };
                    let body = match &t.body {
                        ThreadBody::GappedEdge(e) => BodyJson::GappedEdge {
                            gapped_edge: EdgeJson {
                                l: QStr::of(&e.length),
                                g: QStr::of(&e.gap),
                                samples: e.samples,
                            },
                        },
                        ThreadBody::Complex { complex, boundary } => BodyJson::Complex {
                            complex: Box::new(ComplexJson::of(complex)),
                            boundary: if t.wedge {
                                vec![boundary.0]
                            } else {
                                vec![boundary.0, boundary.1]
                            },
                        },
                    };
                    ThreadJson {
                        anchors,
                        body,
                        wedge: t.wedge,
                    }
                })
                .collect(),
            collapsed: cx
                .collapsed
                .iter()
                .map(|t| TripleJson {
                    x: t.x,
                    y: t.y,
                    a: QStr::of(&t.a),
                })
                .collect(),
            p1u: cx.p1u,
            links: cx
                .links
                .iter()
                .map(|l| LinkJson {
                    a: l.a,
                    b: l.b,
                    length: QStr::of(&l.length),
                })
                .collect(),
            restore_stage: cx.restore_stage,
            base: cx.base.as_ref().map(matrix_json),
        }
    }

    pub fn to_complex(&self) -> Result<SegmentComplex, IoError> {
        let mut cx = SegmentComplex::new(self.frame.to_space()?);
        cx.p1u = self.p1u;
        cx.restore_stage = self.restore_stage;
        cx.base = self.base.as_deref().map(matrix_from_json).transpose()?;
        for l in &self.links {
            cx.links.push(FrameLink {
                a: l.a,
                b: l.b,
                length: l.length.value()?,
            });
        }
        for t in &self.collapsed {
            cx.collapsed.push(BendingTriple::new(t.x, t.y, t.a.value()?));
        }
        for t in &self.threads {
            let anchors = pair(&t.anchors, "anchors")?;
            let wedge = t.wedge || t.anchors.len() == 1;
            let body = match &t.body {
                BodyJson::GappedEdge { gapped_edge: e } => {
                    ThreadBody::GappedEdge(GappedEdge::new(e.l.value()?, e.g.value()?, e.samples)?)
                }
                BodyJson::Complex { complex, boundary } => ThreadBody::Complex {
                    complex: Box::new(complex.to_complex()?),
                    boundary: pair(boundary, "boundary")?,
                },
            };
            cx.threads.push(Thread { anchors, body, wedge });
        }
        cx.check_structure()?;
        Ok(cx)
    }
}

/// Either a bare space (read as a p1u frame) or a full complex.
#[derive(Clone, Debug, Serialize, Deserialize)]
#[serde(untagged)]
pub enum ComplexOrSpace {
    Complex(ComplexJson),
    Space(SpaceJson),
}

impl ComplexOrSpace {
    pub fn to_complex(&self) -> Result<SegmentComplex, IoError> {
        match self {
            ComplexOrSpace::Complex(c) => c.to_complex(),
            ComplexOrSpace::Space(s) => Ok(SegmentComplex::new(s.to_space()?)),
        }
    }
}

/// A map listed as `[source label, target label]` pairs over flattened points.
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct MapJson {
    pub source: ComplexOrSpace,
    pub target: ComplexOrSpace,
    pub pairs: Vec<[String; 2]>,
}

impl MapJson {
    pub fn to_map(&self) -> Result<ComplexMap, IoError> {
        let source = self.source.to_complex()?;
        let target = self.target.to_complex()?;
        let fs = flatten(&source)?.space;
        let ft = flatten(&target)?.space;
        let mut assignment = vec![None; fs.len()];
        for [a, b] in &self.pairs {
            let i = fs
                .index_of(a)
                .ok_or_else(|| IoError::Shape(format!("unknown source label {a:?}")))?;
            let j = ft
                .index_of(b)
                .ok_or_else(|| IoError::Shape(format!("unknown target label {b:?}")))?;
            assignment[i] = Some(j);
        }
        let assignment = assignment
            .into_iter()
            .enumerate()
            .map(|(i, a)| a.ok_or_else(|| IoError::Shape(format!("source point {:?} is unmapped", fs.labels()[i]))))
            .collect::<Result<Vec<_>, _>>()?;
        Ok(ComplexMap {
            source,
            target,
            assignment,
        })
    }

    pub fn of(map: &ComplexMap) -> Result<Self, IoError> {
        let fs = flatten(&map.source)?.space;
        let ft = flatten(&map.target)?.space;
        Ok(Self {
            source: ComplexOrSpace::Complex(ComplexJson::of(&map.source)),
            target: ComplexOrSpace::Complex(ComplexJson::of(&map.target)),
            pairs: map
                .assignment
                .iter()
                .enumerate()
                .map(|(i, &j)| [fs.labels()[i].clone(), ft.labels()[j].clone()])
                .collect(),
        })
    }
}

pub fn to_json<T: Serialize>(v: &T) -> Result<String, IoError> {
    let mut s = serde_json::to_string_pretty(v)?;
    s.push('\n');
    Ok(s)
}

pub fn read_space(text: &str) -> Result<PseudometricSpace, IoError> {
    serde_json::from_str::<SpaceJson>(text)?.to_space()
}

pub fn read_complex(text: &str) -> Result<SegmentComplex, IoError> {
    serde_json::from_str::<ComplexOrSpace>(text)?.to_complex()
}

pub fn read_distortion(text: &str) -> Result<DistortionPL, IoError> {
    serde_json::from_str::<DistortionJson>(text)?.to_distortion()
}

pub fn read_triples(text: &str) -> Result<Vec<BendingTriple>, IoError> {
    serde_json::from_str::<Vec<TripleJson>>(text)?
        .iter()
        .map(|t| Ok(BendingTriple::new(t.x, t.y, t.a.value()?)))
        .collect()
}

pub fn read_map(text: &str) -> Result<ComplexMap, IoError> {
    serde_json::from_str::<MapJson>(text)?.to_map()
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct AttachThreadJson {
    pub anchors: Vec<usize>,
    pub body: SpaceJson,
    pub boundary: Vec<usize>,
}

pub fn read_attach_threads(text: &str) -> Result<Vec<crate::complex::AttachThread>, IoError> {
    serde_json::from_str::<Vec<AttachThreadJson>>(text)?
        .into_iter()
        .map(|t| {
            Ok(crate::complex::AttachThread {
                anchors: t.anchors,
                body: t.body.to_space()?,
                boundary: t.boundary,
            })
        })
        .collect()
}

fn dot_id(s: &str) -> String {
    format!("\"{}\"", s.replace('\\', "\\\\").replace('"', "\\\""))
}

/// Graphviz view of the flattened complex: solid edges solid, gaps dashed,
/// p1u and link edges dotted.
pub fn complex_to_dot(cx: &SegmentComplex) -> Result<String, IoError> {
    let f = flatten(cx)?;
    let labels = f.space.labels();
    let mut out = String::from("graph complex {\n");
    for (i, l) in labels.iter().enumerate() {
        let shape = if i < f.frame_len { "box" } else { "point" };
        let _ = writeln!(out, "  {} [shape={shape}, xlabel={}];", dot_id(l), dot_id(l));
    }
    for e in &f.annotations {
        let style = match e.class {
            EdgeClass::Solid => "solid",
            EdgeClass::Gap => "dashed",
            EdgeClass::P1u | EdgeClass::Link => "dotted",
        };
        let _ = writeln!(
            out,
            "  {} -- {} [style={style}, label={}];",
            dot_id(&labels[e.a]),
            dot_id(&labels[e.b]),
            dot_id(&fmt_q(&e.length))
        );
    }
    out.push_str("}\n");
    Ok(out)
}

/// One row per stage per unordered pair of flattened points.
pub fn trace_to_csv(trace: &CfTrace, labels: &[String]) -> Result<String, IoError> {
    let mut w = csv::Writer::from_writer(Vec::new());
    w.write_record(["stage", "p", "q", "value"])?;
    for (k, st) in trace.states.iter().enumerate() {
        let m = &st.materialized;
        let stage = k.to_string();
        for p in 0..m.len() {
            for q in p + 1..m.len() {
                w.write_record([stage.as_str(), &labels[p], &labels[q], &fmt_q(m.get(p, q))])?;
            }
        }
    }
    csv_string(w)
}

pub(crate) fn csv_string(w: csv::Writer<Vec<u8>>) -> Result<String, IoError> {
    let bytes = w.into_inner().map_err(|e| IoError::Shape(e.to_string()))?;
    String::from_utf8(bytes).map_err(|e| IoError::Shape(e.to_string()))
}

fn constant_str(c: &Constant) -> String {
    match c {
        Constant::Finite(q) => fmt_q(q),
        Constant::Infinite => "inf".into(),
    }
}

#[derive(Clone, Debug, Serialize)]
pub struct WitnessJson {
    pub stage: usize,
    pub x: String,
    pub y: String,
    pub p: String,
    pub lhs: QStr,
    pub rhs: QStr,
    pub margin: QStr,
}

#[derive(Clone, Debug, Serialize)]
pub struct LipReportJson {
    pub lip: String,
    pub colip: String,
    pub product: String,
    pub stages: usize,
    pub holds: bool,
    pub witnesses: Vec<WitnessJson>,
    pub violations: Vec<WitnessJson>,
}

impl LipReportJson {
    pub fn of(rep: &LipschitzQuotientReport, source: &[String], target: &[String]) -> Self {
        let w = |v: &[crate::lipquot::PreimageWitness]| {
            v.iter()
                .map(|w| WitnessJson {
                    stage: w.stage,
                    x: source[w.x].clone(),
                    y: target[w.y].clone(),
                    p: source[w.p].clone(),
                    lhs: QStr::of(&w.lhs),
                    rhs: QStr::of(&w.rhs),
                    margin: QStr::of(&w.margin()),
                })
                .collect()
        };
        Self {
            lip: constant_str(&rep.lip),
            colip: constant_str(&rep.colip),
            product: constant_str(&rep.product),
            stages: rep.stages,
            holds: rep.holds(),
            witnesses: w(&rep.witnesses),
            violations: w(&rep.violations),
        }
    }
}
