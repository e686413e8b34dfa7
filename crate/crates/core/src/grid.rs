//! Uniform dyadic grids on the unit torus and the sampled-field container.

use std::fmt::Write as _;
use std::io::{BufRead, Write};

use crate::error::{Error, Result};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum GridKind {
    /// Points `i * 2^-R`, `i = 0..2^R`.
    Lattice,
    /// Cell midpoints `(i + 1/2) * 2^-R`, `i = 0..2^R`.
    Midpoint,
}

impl GridKind {
    pub fn offset(self) -> f64 {
        match self {
            GridKind::Lattice => 0.0,
            GridKind::Midpoint => 0.5,
        }
    }

    pub fn as_str(self) -> &'static str {
        match self {
            GridKind::Lattice => "lattice",
            GridKind::Midpoint => "midpoint",
        }
    }

    pub fn parse(s: &str) -> Result<Self> {
        match s {
            "lattice" => Ok(GridKind::Lattice),
            "midpoint" => Ok(GridKind::Midpoint),
            other => Err(Error::Parse(format!("unknown grid kind '{other}'"))),
        }
    }
}

/// One-dimensional dyadic grid of `2^R` points on `[0, 1)`.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub struct DyadicGrid {
    pub resolution: u32,
    pub kind: GridKind,
}

impl DyadicGrid {
    pub fn new(resolution: u32, kind: GridKind) -> Self {
        DyadicGrid { resolution, kind }
    }

    pub fn lattice(resolution: u32) -> Self {
        Self::new(resolution, GridKind::Lattice)
    }

    pub fn midpoint(resolution: u32) -> Self {
        Self::new(resolution, GridKind::Midpoint)
    }

    pub fn len(&self) -> usize {
        1usize << self.resolution
    }

    pub fn is_empty(&self) -> bool {
        false
    }

    pub fn step(&self) -> f64 {
        (-(self.resolution as f64)).exp2()
    }

    pub fn point(&self, i: usize) -> f64 {
        (i as f64 + self.kind.offset()) * self.step()
    }
}

/// Values of a function on the tensor grid `grid^d`, row-major with the
/// first coordinate fastest.
#[derive(Clone, Debug, PartialEq)]
pub struct GridField {
    pub dim: usize,
    pub grid: DyadicGrid,
    pub values: Vec<f64>,
}

impl GridField {
    pub fn zeros(dim: usize, grid: DyadicGrid) -> Self {
        let n = grid.len().pow(dim as u32);
        GridField {
            dim,
            grid,
            values: vec![0.0; n],
        }
    }

    pub fn from_values(dim: usize, grid: DyadicGrid, values: Vec<f64>) -> Result<Self> {
        let n = grid.len().pow(dim as u32);
        if values.len() != n {
            return Err(Error::InvalidInput(format!(
                "grid field needs {n} values, got {}",
                values.len()
            )));
        }
        Ok(GridField { dim, grid, values })
    }

    pub fn side(&self) -> usize {
        self.grid.len()
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    /// Flat index of a multi-index (first coordinate fastest).
    pub fn flat_index(&self, idx: &[usize]) -> usize {
        let n = self.side();
        idx.iter().rev().fold(0, |acc, &i| acc * n + i)
    }

    pub fn get(&self, idx: &[usize]) -> f64 {
        self.values[self.flat_index(idx)]
    }

    pub fn map(&self, f: impl Fn(f64) -> f64) -> GridField {
        GridField {
            dim: self.dim,
            grid: self.grid,
            values: self.values.iter().map(|&v| f(v)).collect(),
        }
    }

    pub fn sup_norm(&self) -> f64 {
        self.values.iter().fold(0.0, |m, v| m.max(v.abs()))
    }

    /// Writes the field as text: `#`-prefixed header lines followed by one
    /// line per row (`side` values along the first coordinate).
    pub fn write_to<W: Write>(&self, mut out: W, params: &[(String, String)]) -> Result<()> {
        writeln!(out, "# dim {}", self.dim)?;
        writeln!(out, "# resolution {}", self.grid.resolution)?;
        writeln!(out, "# kind {}", self.grid.kind.as_str())?;
        for (k, v) in params {
            writeln!(out, "# param {k} {v}")?;
        }
        let n = self.side();
        let mut line = String::new();
        for row in self.values.chunks(n) {
            line.clear();
            for (i, v) in row.iter().enumerate() {
                if i > 0 {
                    line.push(',');
                }
                write!(line, "{v:e}").expect("write to string");
            }
            writeln!(out, "{line}")?;
        }
        Ok(())
    }

    /// Reads a field written by [`GridField::write_to`]; returns the echoed
    /// parameters alongside.
    pub fn read_from<R: BufRead>(input: R) -> Result<(GridField, Vec<(String, String)>)> {
        let mut dim = None;
        let mut resolution = None;
        let mut kind = None;
        let mut params = Vec::new();
        let mut values = Vec::new();
        for line in input.lines() {
            let line = line?;
            if let Some(rest) = line.strip_prefix("# ") {
                let mut parts = rest.splitn(2, ' ');
                let key = parts.next().unwrap_or("");
                let val = parts.next().unwrap_or("").trim();
                match key {
                    "dim" => dim = Some(parse_num::<usize>(val)?),
                    "resolution" => resolution = Some(parse_num::<u32>(val)?),
                    "kind" => kind = Some(GridKind::parse(val)?),
                    "param" => {
                        let mut kv = val.splitn(2, ' ');
                        let k = kv.next().unwrap_or("").to_string();
                        let v = kv.next().unwrap_or("").to_string();
                        params.push((k, v));
                    }
                    _ => {}
                }
                continue;
            }
            if line.trim().is_empty() {
                continue;
            }
            for tok in line.split(',') {
                values.push(parse_num::<f64>(tok.trim())?);
            }
        }
        let dim = dim.ok_or_else(|| Error::Parse("missing dim header".into()))?;
        let resolution = resolution.ok_or_else(|| Error::Parse("missing resolution header".into()))?;
        let kind = kind.ok_or_else(|| Error::Parse("missing kind header".into()))?;
        let field = GridField::from_values(dim, DyadicGrid::new(resolution, kind), values)?;
        Ok((field, params))
    }
}

fn parse_num<T: std::str::FromStr>(s: &str) -> Result<T> {
    s.parse::<T>()
        .map_err(|_| Error::Parse(format!("cannot parse '{s}'")))
}
