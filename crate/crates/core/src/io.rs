//! JSON file formats and deterministic report output.
//!
//! Matrices are row-major lists of `[re, im]` pairs. Inside a kernel the
//! shape comes from `dim_out × dim_in`; standalone matrices carry `rows` and
//! `cols`.

use std::io;

use num_complex::Complex64;
use serde::ser::Serialize;
use serde::{Deserialize, Serialize as SerializeDerive};
use serde_json::ser::{Formatter, PrettyFormatter};

use crate::error::{Error, Result};
use crate::kernel::{ConvolutionKernel, GeometricTail, Prehistory};
use crate::linalg::{self, ComplexMatrix, ComplexVector};
use crate::operators::PerturbationStructure;
use crate::tvcert::DisturbanceSpec;

type Pair = [f64; 2];

fn to_pairs<'a>(zs: impl IntoIterator<Item = &'a Complex64>) -> Vec<Pair> {
    zs.into_iter().map(|z| [z.re, z.im]).collect()
}

fn from_pairs(ps: &[Pair]) -> Vec<Complex64> {
    ps.iter().map(|&[re, im]| Complex64::new(re, im)).collect()
}

#[derive(Debug, Clone, PartialEq, SerializeDerive, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct MatrixFile {
    pub rows: usize,
    pub cols: usize,
    pub entries: Vec<Pair>,
}

impl MatrixFile {
    pub fn from_matrix(m: &ComplexMatrix) -> Self {
        Self { rows: m.nrows(), cols: m.ncols(), entries: to_pairs(&linalg::row_major_entries(m)) }
    }

    pub fn to_matrix(&self) -> Result<ComplexMatrix> {
        linalg::from_row_major(self.rows, self.cols, &from_pairs(&self.entries))
    }
}

#[derive(Debug, Clone, PartialEq, SerializeDerive, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TailFile {
    pub coeff: Vec<Pair>,
    pub ratio: Pair,
}

#[derive(Debug, Clone, PartialEq, SerializeDerive, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct KernelFile {
    pub dim_out: usize,
    pub dim_in: usize,
    #[serde(default)]
    pub head: Vec<Vec<Pair>>,
    #[serde(default)]
    pub tails: Vec<TailFile>,
}

impl KernelFile {
    pub fn from_kernel(k: &ConvolutionKernel) -> Self {
        Self {
            dim_out: k.dim_out(),
            dim_in: k.dim_in(),
            head: k.head().iter().map(|m| to_pairs(&linalg::row_major_entries(m))).collect(),
            tails: k
                .tails()
                .iter()
                .map(|t| TailFile { coeff: to_pairs(&linalg::row_major_entries(&t.coeff)), ratio: [t.ratio.re, t.ratio.im] })
                .collect(),
        }
    }

    pub fn to_kernel(&self) -> Result<ConvolutionKernel> {
        let (r, c) = (self.dim_out, self.dim_in);
        let matrix = |entries: &[Pair], what: String| {
            linalg::from_row_major(r, c, &from_pairs(entries)).map_err(|e| Error::InvalidInput(format!("{what}: {e}")))
        };
        let head = self
            .head
            .iter()
            .enumerate()
            .map(|(j, m)| matrix(m, format!("head[{j}]")))
            .collect::<Result<Vec<_>>>()?;
        let tails = self
            .tails
            .iter()
            .enumerate()
            .map(|(k, t)| {
                Ok(GeometricTail {
                    coeff: matrix(&t.coeff, format!("tails[{k}].coeff"))?,
                    ratio: Complex64::new(t.ratio[0], t.ratio[1]),
                })
            })
            .collect::<Result<Vec<_>>>()?;
        ConvolutionKernel::new(r, c, head, tails)
    }
}

/// Perturbation structure `{ "D": matrix, "E": kernel }`.
#[derive(Debug, Clone, PartialEq, SerializeDerive, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct StructureFile {
    #[serde(rename = "D")]
    pub d: MatrixFile,
    #[serde(rename = "E")]
    pub e: KernelFile,
}

impl StructureFile {
    pub fn to_structure(&self) -> Result<PerturbationStructure> {
        PerturbationStructure::new(self.d.to_matrix()?, self.e.to_kernel()?)
    }
}

/// Delayed feedback data `{ "D": matrix, "frakE": matrix }`.
#[derive(Debug, Clone, PartialEq, SerializeDerive, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DelayedFeedbackFile {
    #[serde(rename = "D")]
    pub d: MatrixFile,
    #[serde(rename = "frakE")]
    pub frak_e: MatrixFile,
}

/// Disturbance `{ "rows": [kernel, …], "eventual": kernel }`.
#[derive(Debug, Clone, PartialEq, SerializeDerive, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DisturbanceFile {
    #[serde(default)]
    pub rows: Vec<KernelFile>,
    pub eventual: KernelFile,
}

impl DisturbanceFile {
    pub fn to_spec(&self) -> Result<DisturbanceSpec> {
        let rows = self.rows.iter().map(KernelFile::to_kernel).collect::<Result<Vec<_>>>()?;
        DisturbanceSpec::new(rows, self.eventual.to_kernel()?)
    }
}

#[derive(Debug, Clone, PartialEq, SerializeDerive, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PrehistoryEntry {
    pub m: i64,
    pub value: Vec<Pair>,
}

/// Prehistory `{ "dim": d, "entries": [{ "m": m, "value": [[re, im], …] }] }`.
#[derive(Debug, Clone, PartialEq, SerializeDerive, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PrehistoryFile {
    pub dim: usize,
    pub entries: Vec<PrehistoryEntry>,
}

impl PrehistoryFile {
    pub fn to_prehistory(&self) -> Result<Prehistory> {
        let entries = self
            .entries
            .iter()
            .map(|e| (e.m, ComplexVector::from_vec(from_pairs(&e.value))))
            .collect();
        Prehistory::new(self.dim, entries)
    }
}

fn parse<'a, T: Deserialize<'a>>(text: &'a str, what: &str) -> Result<T> {
    serde_json::from_str(text).map_err(|e| Error::InvalidInput(format!("malformed {what} file: {e}")))
}

pub fn parse_kernel(text: &str) -> Result<ConvolutionKernel> {
    parse::<KernelFile>(text, "kernel")?.to_kernel()
}

pub fn parse_matrix(text: &str) -> Result<ComplexMatrix> {
    parse::<MatrixFile>(text, "matrix")?.to_matrix()
}

pub fn parse_structure(text: &str) -> Result<PerturbationStructure> {
    parse::<StructureFile>(text, "structure")?.to_structure()
}

pub fn parse_delayed_feedback(text: &str) -> Result<(ComplexMatrix, ComplexMatrix)> {
    let f = parse::<DelayedFeedbackFile>(text, "delayed feedback")?;
    Ok((f.d.to_matrix()?, f.frak_e.to_matrix()?))
}

pub fn parse_disturbance(text: &str) -> Result<DisturbanceSpec> {
    parse::<DisturbanceFile>(text, "disturbance")?.to_spec()
}

pub fn parse_prehistory(text: &str) -> Result<Prehistory> {
    parse::<PrehistoryFile>(text, "prehistory")?.to_prehistory()
}

/// Floats in scientific notation with 17 significant digits, so that every
/// `f64` round-trips and equal inputs give byte-identical output.
pub fn format_f64(x: f64) -> String {
    if x.is_finite() {
        format!("{x:.16e}")
    } else if x.is_nan() {
        "nan".to_string()
    } else if x > 0.0 {
        "inf".to_string()
    } else {
        "-inf".to_string()
    }
}

struct ReportFormatter {
    pretty: PrettyFormatter<'static>,
}

impl Formatter for ReportFormatter {
    fn write_f64<W: ?Sized + io::Write>(&mut self, writer: &mut W, value: f64) -> io::Result<()> {
        if value.is_finite() {
            writer.write_all(format_f64(value).as_bytes())
        } else {
            writer.write_all(b"null")
        }
    }

    fn write_f32<W: ?Sized + io::Write>(&mut self, writer: &mut W, value: f32) -> io::Result<()> {
        self.write_f64(writer, value as f64)
    }

    fn begin_array<W: ?Sized + io::Write>(&mut self, writer: &mut W) -> io::Result<()> {
        self.pretty.begin_array(writer)
    }

    fn end_array<W: ?Sized + io::Write>(&mut self, writer: &mut W) -> io::Result<()> {
        self.pretty.end_array(writer)
    }

    fn begin_array_value<W: ?Sized + io::Write>(&mut self, writer: &mut W, first: bool) -> io::Result<()> {
        self.pretty.begin_array_value(writer, first)
    }

    fn end_array_value<W: ?Sized + io::Write>(&mut self, writer: &mut W) -> io::Result<()> {
        self.pretty.end_array_value(writer)
    }

    fn begin_object<W: ?Sized + io::Write>(&mut self, writer: &mut W) -> io::Result<()> {
        self.pretty.begin_object(writer)
    }

    fn end_object<W: ?Sized + io::Write>(&mut self, writer: &mut W) -> io::Result<()> {
        self.pretty.end_object(writer)
    }

    fn begin_object_key<W: ?Sized + io::Write>(&mut self, writer: &mut W, first: bool) -> io::Result<()> {
        self.pretty.begin_object_key(writer, first)
    }

    fn begin_object_value<W: ?Sized + io::Write>(&mut self, writer: &mut W) -> io::Result<()> {
        self.pretty.begin_object_value(writer)
    }

    fn end_object_value<W: ?Sized + io::Write>(&mut self, writer: &mut W) -> io::Result<()> {
        self.pretty.end_object_value(writer)
    }
}

/// Pretty-printed JSON using [`format_f64`] for every float.
pub fn to_json<T: Serialize + ?Sized>(value: &T) -> Result<String> {
    let mut out = Vec::new();
    let formatter = ReportFormatter { pretty: PrettyFormatter::with_indent(b"  ") };
    let mut ser = serde_json::Serializer::with_formatter(&mut out, formatter);
    value.serialize(&mut ser).map_err(|e| Error::InvalidInput(format!("cannot serialize report: {e}")))?;
    out.push(b'\n');
    String::from_utf8(out).map_err(|e| Error::InvalidInput(e.to_string()))
}
