//! Double-sided TWR under clock drift, next to the single-sided estimate.

use coloc::twr::{simulate_exchange, tof_estimate, ClockModel, SPEED_OF_LIGHT};

fn main() -> coloc::Result<()> {
    let distance = 3.0;
    let (reply1, reply2) = (300e-6, 250e-6);
    println!("ppm_i  ppm_r   ss_err_m     ds_err_m");
    for (ppm_i, ppm_r) in [(0.0, 0.0), (5.0, -5.0), (20.0, -20.0), (-20.0, 15.0)] {
        let init = ClockModel::new(0.013, ppm_i * 1e-6, 0.0)?;
        let resp = ClockModel::new(0.021, ppm_r * 1e-6, 0.0)?;
        let ex = simulate_exchange(distance, &init, &resp, reply1, reply2)?;
        let ds = SPEED_OF_LIGHT * tof_estimate(&ex)?;
        // single-sided: first round minus the responder's turnaround
        let ss = SPEED_OF_LIGHT * (ex.t_round1 - ex.t_reply1) / 2.0;
        println!("{ppm_i:>5} {ppm_r:>6} {:>11.4e} {:>11.4e}", ss - distance, ds - distance);
    }
    Ok(())
}
