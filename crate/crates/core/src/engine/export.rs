use std::io::{self, Write};

use super::Trajectory;

/// Writes `t_s,re_alpha,im_alpha,n_photon,p0,p1,...`, one row per snapshot,
/// with 17 significant digits.
pub fn write_trajectory_csv<W: Write>(traj: &Trajectory, mut w: W) -> io::Result<()> {
    write!(w, "t_s,re_alpha,im_alpha,n_photon")?;
    for k in 0..traj.n_levels() {
        write!(w, ",p{k}")?;
    }
    writeln!(w)?;
    for i in 0..traj.len() {
        write!(
            w,
            "{:.16e},{:.16e},{:.16e},{:.16e}",
            traj.times[i], traj.alpha[i].re, traj.alpha[i].im, traj.photon_number[i]
        )?;
        for p in &traj.populations {
            write!(w, ",{:.16e}", p[i])?;
        }
        writeln!(w)?;
    }
    Ok(())
}

pub fn trajectory_csv(traj: &Trajectory) -> String {
    let mut buf = Vec::new();
    write_trajectory_csv(traj, &mut buf).expect("writing to memory");
    String::from_utf8(buf).expect("ascii output")
}
