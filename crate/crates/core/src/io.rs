//! Text formats: dense Hamiltonian files, Pauli-sum files, sweep CSV read-back,
//! and atomic file output.

use std::fs;
use std::path::Path;

use crate::error::{Error, Result};
use crate::model::SystemHamiltonian;
use crate::operators::{c, kron, ComplexMatrix, Pauli, C64};
use crate::spectroscopy::{make_grid, FrequencyGrid};

/// Relative Hermiticity tolerance for matrices read from files.
pub const FILE_HERMITIAN_TOL: f64 = 1e-10;

fn content_lines(text: &str) -> impl Iterator<Item = (usize, &str)> {
    text.lines()
        .enumerate()
        .map(|(i, l)| (i + 1, l.split('#').next().unwrap_or("").trim()))
        .filter(|(_, l)| !l.is_empty())
}

fn parse_f64(tok: &str, line: usize) -> Result<f64> {
    tok.parse::<f64>()
        .ok()
        .filter(|v| v.is_finite())
        .ok_or_else(|| Error::Parse {
            line,
            message: format!("not a finite number: {tok:?}"),
        })
}

/// First line `N`, then `N` rows of `N` whitespace-separated `re im` pairs.
///
/// Blank lines and `#` comments are skipped. The Hermitian part is kept after
/// checking the defect against [`FILE_HERMITIAN_TOL`].
pub fn parse_dense_hamiltonian(text: &str) -> Result<SystemHamiltonian> {
    let mut lines = content_lines(text);
    let (line, header) = lines.next().ok_or(Error::Parse {
        line: 1,
        message: "missing dimension line".into(),
    })?;
    let n: usize = header.parse().map_err(|_| Error::Parse {
        line,
        message: format!("dimension must be a positive integer, got {header:?}"),
    })?;
    if n < 2 || !n.is_power_of_two() {
        return Err(Error::BadDimension(n));
    }
    let mut data = Vec::with_capacity(n * n);
    let mut last_line = line;
    for row in 0..n {
        let (line, content) = lines.next().ok_or(Error::Parse {
            line: last_line + 1,
            message: format!("expected {n} matrix rows, found {row}"),
        })?;
        last_line = line;
        let toks: Vec<&str> = content.split_whitespace().collect();
        if toks.len() != 2 * n {
            return Err(Error::Parse {
                line,
                message: format!("expected {} numbers ({n} re/im pairs), found {}", 2 * n, toks.len()),
            });
        }
        for pair in toks.chunks(2) {
            data.push(c(parse_f64(pair[0], line)?, parse_f64(pair[1], line)?));
        }
    }
    if let Some((line, _)) = lines.next() {
        return Err(Error::Parse {
            line,
            message: "unexpected content after the matrix".into(),
        });
    }
    let m = ComplexMatrix::from_vec(n, n, data);
    let defect = m.hermitian_defect();
    if defect > FILE_HERMITIAN_TOL * m.max_abs() {
        return Err(Error::NotHermitian { asymmetry: defect });
    }
    let h = (&m + &m.adjoint()).scale_real(0.5);
    SystemHamiltonian::new(h)
}

/// Inverse of [`parse_dense_hamiltonian`]; values use shortest round-trip form.
pub fn write_dense_hamiltonian(sys: &SystemHamiltonian) -> String {
    let m = sys.matrix();
    let n = m.rows();
    let mut out = format!("{n}\n");
    for i in 0..n {
        let row: Vec<String> = (0..n).map(|j| format!("{:?} {:?}", m[(i, j)].re, m[(i, j)].im)).collect();
        out.push_str(&row.join("  "));
        out.push('\n');
    }
    out
}

/// Lines of `coefficient STRING` with `STRING` over `{I, X, Y, Z}`; the leftmost
/// letter acts on the most significant qubit.
pub fn parse_pauli_sum(text: &str) -> Result<SystemHamiltonian> {
    let mut total: Option<ComplexMatrix> = None;
    let mut width = 0;
    for (line, content) in content_lines(text) {
        let toks: Vec<&str> = content.split_whitespace().collect();
        if toks.len() != 2 {
            return Err(Error::Parse {
                line,
                message: "expected `coefficient pauli_string`".into(),
            });
        }
        let coeff = parse_f64(toks[0], line)?;
        let word = toks[1];
        let paulis = word
            .chars()
            .map(|ch| match ch.to_ascii_uppercase() {
                'I' => Ok(Pauli::I),
                'X' => Ok(Pauli::X),
                'Y' => Ok(Pauli::Y),
                'Z' => Ok(Pauli::Z),
                other => Err(Error::Parse {
                    line,
                    message: format!("invalid Pauli letter {other:?}"),
                }),
            })
            .collect::<Result<Vec<_>>>()?;
        if total.is_none() {
            width = paulis.len();
        } else if paulis.len() != width {
            return Err(Error::InconsistentLength {
                line,
                expected: width,
                found: paulis.len(),
            });
        }
        let term = paulis
            .iter()
            .map(|p| p.matrix())
            .reduce(|acc, m| kron(&acc, &m))
            .ok_or(Error::Parse {
                line,
                message: "empty Pauli string".into(),
            })?
            .scale_real(coeff);
        total = Some(match total {
            Some(t) => &t + &term,
            None => term,
        });
    }
    let total = total.ok_or(Error::Parse {
        line: 1,
        message: "no Pauli terms".into(),
    })?;
    SystemHamiltonian::new(total)
}

/// Rows of a sweep CSV as written by `SweepResult::to_csv`.
#[derive(Clone, Debug, PartialEq)]
pub struct SweepTable {
    pub omegas: Vec<f64>,
    pub decay: Vec<f64>,
    /// `(shots, successes)` per row when present.
    pub shots: Option<Vec<(u64, u64)>>,
}

pub fn parse_sweep_csv(text: &str) -> Result<SweepTable> {
    let mut lines = text.lines().enumerate().filter(|(_, l)| !l.trim().is_empty());
    let (_, header) = lines.next().ok_or(Error::Parse {
        line: 1,
        message: "empty sweep file".into(),
    })?;
    let cols: Vec<&str> = header.split(',').map(str::trim).collect();
    let with_shots = match cols.as_slice() {
        ["omega", "p_decay"] => false,
        ["omega", "p_decay", "shots", "successes"] => true,
        _ => {
            return Err(Error::Parse {
                line: 1,
                message: format!("unexpected header {header:?}"),
            })
        }
    };
    let mut table = SweepTable {
        omegas: Vec::new(),
        decay: Vec::new(),
        shots: with_shots.then(Vec::new),
    };
    for (i, l) in lines {
        let line = i + 1;
        let f: Vec<&str> = l.split(',').map(str::trim).collect();
        if f.len() != cols.len() {
            return Err(Error::Parse {
                line,
                message: format!("expected {} fields, found {}", cols.len(), f.len()),
            });
        }
        table.omegas.push(parse_f64(f[0], line)?);
        table.decay.push(parse_f64(f[1], line)?);
        if let Some(s) = table.shots.as_mut() {
            let parse_u = |t: &str| {
                t.parse::<u64>().map_err(|_| Error::Parse {
                    line,
                    message: format!("not a count: {t:?}"),
                })
            };
            s.push((parse_u(f[2])?, parse_u(f[3])?));
        }
    }
    if table.omegas.is_empty() {
        return Err(Error::Parse {
            line: 2,
            message: "sweep file has no rows".into(),
        });
    }
    Ok(table)
}

impl SweepTable {
    /// Recovers the grid from equally spaced centers.
    pub fn grid(&self, single_point_spacing: f64) -> Result<FrequencyGrid> {
        let m = self.omegas.len();
        let delta = if m >= 2 {
            (self.omegas[m - 1] - self.omegas[0]) / (m - 1) as f64
        } else {
            single_point_spacing
        };
        for (k, w) in self.omegas.iter().enumerate() {
            let expected = self.omegas[0] + k as f64 * delta;
            if (w - expected).abs() > 1e-6 * delta.abs().max(1e-12) + 1e-9 {
                return Err(Error::Parse {
                    line: k + 2,
                    message: "frequencies are not equally spaced".into(),
                });
            }
        }
        make_grid(self.omegas[0] - 0.5 * delta, self.omegas[m - 1] + 0.5 * delta, m)
    }
}

/// Writes through a sibling temporary file and renames it into place.
pub fn write_atomic(path: &Path, contents: &str) -> Result<()> {
    let dir = path.parent().filter(|p| !p.as_os_str().is_empty()).unwrap_or(Path::new("."));
    fs::create_dir_all(dir)?;
    let name = path
        .file_name()
        .ok_or_else(|| Error::Io(format!("not a file path: {}", path.display())))?;
    let tmp = dir.join(format!(".{}.tmp{}", name.to_string_lossy(), std::process::id()));
    fs::write(&tmp, contents)?;
    fs::rename(&tmp, path).inspect_err(|_| {
        let _ = fs::remove_file(&tmp);
    })?;
    Ok(())
}

/// Complex amplitudes as `re im` text, one pair per line.
pub fn write_state(amplitudes: &[C64]) -> String {
    amplitudes.iter().map(|z| format!("{:?} {:?}\n", z.re, z.im)).collect()
}
