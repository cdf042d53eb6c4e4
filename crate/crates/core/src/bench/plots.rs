//! CSV data behind the loss-curve, fee-path and prediction overlay plots.

use std::io::Write;

use super::BenchError;
use crate::features::AlignedDataset;
use crate::fee::FeeTrajectory;

/// `epoch,loss`, epoch 0 being the objective before training.
pub fn write_loss_curve<W: Write>(curve: &[f64], out: W) -> Result<(), BenchError> {
    let mut w = csv::Writer::from_writer(out);
    w.write_record(["epoch", "loss"])?;
    for (epoch, loss) in curve.iter().enumerate() {
        w.write_record([epoch.to_string(), loss.to_string()])?;
    }
    w.flush()?;
    Ok(())
}

/// Reactive and proactive runs side by side, one line per block.
pub fn write_fee_paths<W: Write>(
    reactive: &FeeTrajectory,
    proactive: &FeeTrajectory,
    out: W,
) -> Result<(), BenchError> {
    if reactive.len() != proactive.len() {
        return Err(BenchError::Report(format!(
            "trajectories differ in length: {} and {}",
            reactive.len(),
            proactive.len()
        )));
    }
    let mut w = csv::Writer::from_writer(out);
    w.write_record([
        "block_number",
        "reactive_fee",
        "proactive_fee",
        "reactive_load",
        "proactive_load",
        "predicted_load",
    ])?;
    for (r, p) in reactive.steps.iter().zip(&proactive.steps) {
        w.write_record([
            r.block_number.to_string(),
            r.base_fee.to_string(),
            p.base_fee.to_string(),
            r.normalized_load.to_string(),
            p.normalized_load.to_string(),
            p.predicted_load.map_or(String::new(), |y| y.to_string()),
        ])?;
    }
    w.flush()?;
    Ok(())
}

/// `target_block,actual,predicted` for the windows of `test`.
pub fn write_predictions<W: Write>(test: &AlignedDataset, predicted: &[f64], out: W) -> Result<(), BenchError> {
    if test.len() != predicted.len() {
        return Err(BenchError::Report(format!(
            "{} windows but {} predictions",
            test.len(),
            predicted.len()
        )));
    }
    let mut w = csv::Writer::from_writer(out);
    w.write_record(["target_block", "actual", "predicted"])?;
    for (win, p) in test.windows().iter().zip(predicted) {
        w.write_record([win.target_block.to_string(), win.target_y.to_string(), p.to_string()])?;
    }
    w.flush()?;
    Ok(())
}
