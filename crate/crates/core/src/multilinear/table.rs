//! Quartic symbols tabulated on lattice tuples, read from CSV.
//!
//! Columns: `k1x,k1y,k2x,k2y,k3x,k3y,k4x,k4y,re,im` with integer modes summing
//! to zero. Tuples absent from the table evaluate to 0.

use std::collections::HashMap;
use std::io::Read;

use num_complex::Complex64;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::error::{Error, Result};
use crate::grid::{Freq, Grid2D, Mode};
use crate::multilinear::Symbol;

pub const TABLE_COLUMNS: [&str; 10] = [
    "k1x", "k1y", "k2x", "k2y", "k3x", "k3y", "k4x", "k4y", "re", "im",
];

#[derive(Clone, Debug)]
pub struct TabulatedSymbol {
    spacing: f64,
    values: HashMap<[Mode; 4], Complex64>,
}

impl TabulatedSymbol {
    pub fn new(spacing: f64) -> Self {
        Self {
            spacing,
            values: HashMap::new(),
        }
    }

    pub fn insert(&mut self, modes: [Mode; 4], value: Complex64) -> Result<()> {
        let sum = modes.iter().fold([0, 0], |s, k| [s[0] + k[0], s[1] + k[1]]);
        if sum != [0, 0] {
            return Err(Error::Format(format!(
                "tuple {modes:?} does not sum to zero"
            )));
        }
        self.values.insert(modes, value);
        Ok(())
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    pub fn from_csv(input: impl Read, spacing: f64) -> Result<Self> {
        let mut reader = csv::Reader::from_reader(input);
        let headers = reader
            .headers()
            .map_err(|e| Error::Format(e.to_string()))?
            .clone();
        if headers.iter().ne(TABLE_COLUMNS) {
            return Err(Error::Format(format!(
                "symbol table header must be {}",
                TABLE_COLUMNS.join(",")
            )));
        }
        let mut table = Self::new(spacing);
        for (line, record) in reader.records().enumerate() {
            let record = record.map_err(|e| Error::Format(e.to_string()))?;
            let bad =
                |field: &str| Error::Format(format!("row {}: cannot parse {field:?}", line + 1));
            let mut ints = [0i32; 8];
            for (j, v) in ints.iter_mut().enumerate() {
                *v = record[j].trim().parse().map_err(|_| bad(&record[j]))?;
            }
            let re: f64 = record[8].trim().parse().map_err(|_| bad(&record[8]))?;
            let im: f64 = record[9].trim().parse().map_err(|_| bad(&record[9]))?;
            let modes = [
                [ints[0], ints[1]],
                [ints[2], ints[3]],
                [ints[4], ints[5]],
                [ints[6], ints[7]],
            ];
            table.insert(modes, Complex64::new(re, im))?;
        }
        Ok(table)
    }

    fn mode(&self, xi: Freq) -> Mode {
        [
            (xi[0] / self.spacing).round() as i32,
            (xi[1] / self.spacing).round() as i32,
        ]
    }
}

impl Symbol for TabulatedSymbol {
    fn arity(&self) -> usize {
        4
    }

    fn eval(&self, xi: &[Freq]) -> Complex64 {
        let key = [
            self.mode(xi[0]),
            self.mode(xi[1]),
            self.mode(xi[2]),
            self.mode(xi[3]),
        ];
        self.values.get(&key).copied().unwrap_or_default()
    }
}

/// `count` uniformly drawn dealiased quadruples summing to zero, as CSV in the
/// table format with the symbol's values.
pub fn dump_symbol_csv(
    symbol: &(impl Symbol + ?Sized),
    grid: Grid2D,
    count: usize,
    seed: u64,
) -> Result<Vec<u8>> {
    if symbol.arity() != 4 {
        return Err(Error::Arity {
            expected: 4,
            got: symbol.arity(),
        });
    }
    let active: Vec<Mode> = grid.active_modes().collect();
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut w = csv::WriterBuilder::new()
        .terminator(csv::Terminator::CRLF)
        .from_writer(Vec::new());
    let to_err = |e: csv::Error| Error::Report(e.to_string());
    w.write_record(TABLE_COLUMNS).map_err(to_err)?;
    let mut written = 0;
    while written < count {
        let pick = |rng: &mut ChaCha8Rng| active[rng.random_range(0..active.len())];
        let (a, b, c) = (pick(&mut rng), pick(&mut rng), pick(&mut rng));
        let d = [-(a[0] + b[0] + c[0]), -(a[1] + b[1] + c[1])];
        if !grid.is_active(d) {
            continue;
        }
        let modes = [a, b, c, d];
        let value = symbol.eval(&modes.map(|k| grid.frequency(k)));
        let mut row: Vec<String> = modes
            .iter()
            .flat_map(|k| [k[0].to_string(), k[1].to_string()])
            .collect();
        row.push(format!("{:e}", value.re));
        row.push(format!("{:e}", value.im));
        w.write_record(&row).map_err(to_err)?;
        written += 1;
    }
    w.into_inner().map_err(|e| Error::Report(e.to_string()))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::grid::Spectrum;
    use crate::multilinear::{eval_lambda4_direct, Constant};

    #[test]
    fn dump_then_reload_round_trips() {
        let grid = Grid2D::periodic(12).unwrap();
        let c = Constant {
            arity: 4,
            value: Complex64::new(0.25, -1.0),
        };
        let bytes = dump_symbol_csv(&c, grid, 50, 3).unwrap();
        let table = TabulatedSymbol::from_csv(&bytes[..], grid.spacing()).unwrap();
        assert!(table.len() <= 50 && !table.is_empty());
        for key in table.values.keys() {
            assert_eq!(table.eval(&key.map(|k| grid.frequency(k))), c.value);
        }
        assert_eq!(
            table.eval(&[[9.0, 0.0], [-9.0, 0.0], [0.0, 0.0], [0.0, 0.0]]),
            Complex64::default()
        );
    }

    #[test]
    fn single_entry_picks_one_product() {
        let grid = Grid2D::periodic(8).unwrap();
        let one = Complex64::new(1.0, 0.0);
        let spec = Spectrum::from_modes(grid, [([1, 0], one), ([0, 1], Complex64::new(0.0, 2.0))])
            .unwrap();
        let mut t = TabulatedSymbol::new(grid.spacing());
        t.insert([[1, 0], [-1, 0], [0, 1], [0, -1]], one).unwrap();
        let got = eval_lambda4_direct(&t, &spec, None).unwrap();
        let l2 = grid.length().powi(2);
        // Slots (u, conj u, u, conj u) give |c(1,0)|^2 |c(0,1)|^2 = 4.
        assert!((got - 4.0 * l2).abs() < 1e-10 * l2, "{got}");
    }

    #[test]
    fn rejects_bad_tables() {
        let bad_sum = "k1x,k1y,k2x,k2y,k3x,k3y,k4x,k4y,re,im\n1,0,0,0,0,0,0,0,1,0\n";
        assert!(TabulatedSymbol::from_csv(bad_sum.as_bytes(), 1.0).is_err());
        assert!(TabulatedSymbol::from_csv("a,b\n1,2\n".as_bytes(), 1.0).is_err());
        let bad_num = "k1x,k1y,k2x,k2y,k3x,k3y,k4x,k4y,re,im\n1,0,-1,0,0,0,0,0,x,0\n";
        assert!(TabulatedSymbol::from_csv(bad_num.as_bytes(), 1.0).is_err());
    }
}
