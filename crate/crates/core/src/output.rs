//! Trace files: CSV writers for per-slice diagnostic records and the final
//! field state.
//!
//! Every column carries a unit suffix naming the mass power that was scaled
//! out: `x_per_M` stores x/M, `x_times_M` stores x*M, `x_times_M2` stores
//! x*M^2, and `_per_M09` marks the one fractional case (the interior bulk
//! increment, whose r^{-1.1} weight leaves dimension M^0.9). Unsuffixed
//! columns are dimensionless. Files are therefore invariant under rescaling
//! the configured mass, and floats use the shortest round-trip format so a
//! rerun of the same configuration reproduces identical bytes.

use std::io::{self, BufWriter, Write};
use std::path::Path;

use crate::diagnostics::{EnergyRecord, HorizonTrace};
use crate::dynamics::NormRecord;
use crate::fields::{FieldState, Grid};

fn fmt(x: f64) -> String {
    format!("{x:?}")
}

fn write_rows(
    path: &Path,
    header: &str,
    rows: impl Iterator<Item = Vec<f64>>,
) -> io::Result<()> {
    let mut out = BufWriter::new(std::fs::File::create(path)?);
    writeln!(out, "{header}")?;
    for row in rows {
        let line: Vec<String> = row.iter().map(|&x| fmt(x)).collect();
        writeln!(out, "{}", line.join(","))?;
    }
    out.flush()
}

/// Horizon-sample trace: charge, restriction, and transversal derivatives.
pub fn write_horizon_csv(
    path: impl AsRef<Path>,
    rows: &[HorizonTrace],
    mass: f64,
) -> io::Result<()> {
    write_rows(
        path.as_ref(),
        "t_star_per_M,v_per_M,psi0,tpsi0_times_M,ypsi0_times_M,y2psi0_times_M2,h0_times_M",
        rows.iter().map(|h| {
            vec![
                h.t_star / mass,
                h.v / mass,
                h.psi0,
                h.tpsi0 * mass,
                h.ypsi0 * mass,
                h.y2psi0 * mass * mass,
                h.h0 * mass,
            ]
        }),
    )
}

/// Energy hierarchy, weighted flux energies, bulk increment, Hardy quotient.
pub fn write_energy_csv(
    path: impl AsRef<Path>,
    rows: &[EnergyRecord],
    mass: f64,
) -> io::Result<()> {
    write_rows(
        path.as_ref(),
        "t_star_per_M,e_t_per_M,e_p_per_M,e_n_per_M,rp1,rp2_per_M,\
         morawetz_increment_per_M09,hardy_ratio",
        rows.iter().map(|e| {
            vec![
                e.t_star / mass,
                e.e_t / mass,
                e.e_p / mass,
                e.e_n / mass,
                e.rp1,
                e.rp2 / mass,
                e.morawetz_increment / mass.powf(0.9),
                e.hardy_ratio,
            ]
        }),
    )
}

/// Monitored sup norms per slice.
pub fn write_norms_csv(
    path: impl AsRef<Path>,
    rows: &[NormRecord],
    mass: f64,
) -> io::Result<()> {
    write_rows(
        path.as_ref(),
        "t_star_per_M,psi_sup,t_psi_sup_times_M,weighted_y_sup_times_M,angular_sup_times_M",
        rows.iter().map(|n| {
            vec![
                n.t_star / mass,
                n.norms.psi,
                n.norms.t_psi * mass,
                n.norms.weighted_y * mass,
                n.norms.angular * mass,
            ]
        }),
    )
}

/// Final slice dump, one row per node.
pub fn write_state_csv(
    path: impl AsRef<Path>,
    state: &FieldState,
    grid: &Grid,
) -> io::Result<()> {
    let mass = grid.params.mass;
    let nt = grid.n_theta();
    write_rows(
        path.as_ref(),
        "r_per_M,theta_index,psi,pi_times_M,phi_times_M",
        (0..grid.n_r()).flat_map(|i| {
            (0..nt).map(move |j| (i, j))
        }).map(|(i, j)| {
            let idx = i * nt + j;
            vec![
                grid.r[i] / mass,
                j as f64,
                state.psi[idx],
                state.pi[idx] * mass,
                state.phi_r[idx] * mass,
            ]
        }),
    )
}

/// Reads a trace CSV back: header names and numeric rows.
pub fn read_csv(path: impl AsRef<Path>) -> io::Result<(Vec<String>, Vec<Vec<f64>>)> {
    let text = std::fs::read_to_string(path)?;
    let mut lines = text.lines();
    let header: Vec<String> = lines
        .next()
        .unwrap_or("")
        .split(',')
        .map(|s| s.trim().to_string())
        .collect();
    let mut rows = Vec::new();
    for (k, line) in lines.enumerate() {
        if line.trim().is_empty() {
            continue;
        }
        let mut row = Vec::with_capacity(header.len());
        for cell in line.split(',') {
            row.push(cell.trim().parse::<f64>().map_err(|e| {
                io::Error::new(io::ErrorKind::InvalidData, format!("row {}: {e}", k + 2))
            })?);
        }
        rows.push(row);
    }
    Ok((header, rows))
}

/// Column by exact header name.
pub fn csv_column(header: &[String], rows: &[Vec<f64>], name: &str) -> Option<Vec<f64>> {
    let k = header.iter().position(|h| h == name)?;
    Some(rows.iter().map(|r| r[k]).collect())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::diagnostics::HorizonTrace;

    fn tmp(name: &str) -> std::path::PathBuf {
        std::env::temp_dir().join(format!("exwave-output-test-{}-{name}", std::process::id()))
    }

    #[test]
    fn horizon_csv_round_trips_and_scales_out_mass() {
        let rows = [
            HorizonTrace {
                t_star: 4.0,
                v: 6.0,
                psi0: 0.125,
                tpsi0: -0.03,
                ypsi0: 0.5,
                y2psi0: 0.25,
                h0: 0.5625,
            },
        ];
        let path = tmp("horizon.csv");
        write_horizon_csv(&path, &rows, 2.0).unwrap();
        let (header, data) = read_csv(&path).unwrap();
        std::fs::remove_file(&path).unwrap();
        assert_eq!(header[0], "t_star_per_M");
        assert_eq!(csv_column(&header, &data, "t_star_per_M").unwrap(), vec![2.0]);
        assert_eq!(csv_column(&header, &data, "ypsi0_times_M").unwrap(), vec![1.0]);
        assert_eq!(csv_column(&header, &data, "y2psi0_times_M2").unwrap(), vec![1.0]);
        assert_eq!(csv_column(&header, &data, "h0_times_M").unwrap(), vec![1.125]);
    }

    #[test]
    fn float_format_survives_a_round_trip_exactly() {
        let xs = [0.1, 1.0 / 3.0, 6.02e23, -5.5e-17, 0.0];
        for x in xs {
            assert_eq!(fmt(x).parse::<f64>().unwrap(), x);
        }
    }
}
