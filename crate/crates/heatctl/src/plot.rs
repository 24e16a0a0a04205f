//! Gnuplot script for the standard figures of a closed-loop run.

use std::path::Path;

use crate::error::{CliError, CliResult};

/// Writes `plots.gp` into `dir`; run with `gnuplot plots.gp` from that directory.
/// `first`/`last` are the snapshot indices to draw; `open_loop` adds the
/// uncontrolled norm when a companion run exists.
pub fn write_script(dir: &Path, first: usize, last: usize, open_loop: bool) -> CliResult<()> {
    let mut s = String::from(
        "# Renders fig_initial.png, fig_final.png, fig_slice.png, fig_control.png and fig_norms.png.\n\
         set datafile separator ','\n\
         set terminal pngcairo size 900,650\n\
         set key autotitle columnhead\n\
         set dgrid3d 41,41 qnorm 2\n\
         set hidden3d\n\
         set xlabel 'x'\n\
         set ylabel 'y'\n",
    );
    for (name, idx) in [("initial", first), ("final", last)] {
        s += &format!(
            "set output 'fig_{name}.png'\nset title 'w(x, y) at step {idx}'\nsplot 'w_t{idx}.csv' using 1:2:3 with lines notitle\n"
        );
    }
    s += "set output 'fig_slice.png'\nset title 'w(x, y_s, t)'\nset xlabel 't'\nset ylabel 'x'\n\
          splot 'slice.csv' using 1:2:3 with lines notitle\n";
    s += "set output 'fig_control.png'\nset title 'boundary state v(x, b, t)'\nset ylabel 'x'\n\
          splot 'control_top.csv' using 1:2:3 with lines notitle\n";
    s += "set output 'fig_control_right.png'\nset title 'boundary state v(a, y, t)'\nset ylabel 'y'\n\
          splot 'control_right.csv' using 1:2:3 with lines notitle\n";
    s += "unset dgrid3d\nset output 'fig_norms.png'\nset title '||w(t)||'\nset xlabel 't'\nset ylabel 'norm'\nset logscale y\n";
    if open_loop {
        s += "plot 'trace.csv' using 1:2 with lines title 'closed loop', \\\n     'open_loop/trace.csv' using 1:2 with lines title 'open loop'\n";
    } else {
        s += "plot 'trace.csv' using 1:2 with lines title 'w'\n";
    }
    let path = dir.join("plots.gp");
    std::fs::create_dir_all(dir).map_err(CliError::io(dir))?;
    std::fs::write(&path, s).map_err(CliError::io(&path))
}
