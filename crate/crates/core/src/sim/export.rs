use serde::Serialize;

use super::SimReport;

pub const REPORT_CSV_HEADER: &str = "row,kernel,avg_cycles,min_cycles,max_cycles,compute_avg_cycles,\
compute_min_cycles,compute_max_cycles,busy_cycles,stall_cycles,\
mode,interface,n_units,n_gaussians,total_cycles,throughput_bytes_per_sec,effective_parallel_efficiency,\
bottleneck_kernel";

/// One CSV line: a kernel row fills the per-kernel columns, the summary row
/// fills the rest.
#[derive(Debug, Clone, Default, PartialEq, Serialize)]
pub struct CsvRow {
    pub row: &'static str,
    pub kernel: Option<String>,
    pub avg_cycles: Option<f64>,
    pub min_cycles: Option<u64>,
    pub max_cycles: Option<u64>,
    pub compute_avg_cycles: Option<f64>,
    pub compute_min_cycles: Option<u64>,
    pub compute_max_cycles: Option<u64>,
    pub busy_cycles: Option<u64>,
    pub stall_cycles: Option<u64>,
    pub mode: Option<String>,
    pub interface: Option<String>,
    pub n_units: Option<usize>,
    pub n_gaussians: Option<usize>,
    pub total_cycles: Option<f64>,
    pub throughput_bytes_per_sec: Option<f64>,
    pub effective_parallel_efficiency: Option<f64>,
    pub bottleneck_kernel: Option<String>,
}

impl SimReport {
    pub fn csv_rows(&self) -> Vec<CsvRow> {
        let mut rows: Vec<CsvRow> = self
            .kernels
            .iter()
            .map(|k| CsvRow {
                row: "kernel",
                kernel: Some(k.kernel.to_string()),
                avg_cycles: Some(k.avg_cycles),
                min_cycles: Some(k.min_cycles),
                max_cycles: Some(k.max_cycles),
                compute_avg_cycles: Some(k.compute_avg_cycles),
                compute_min_cycles: Some(k.compute_min_cycles),
                compute_max_cycles: Some(k.compute_max_cycles),
                busy_cycles: Some(k.busy_cycles),
                stall_cycles: Some(k.stall_cycles),
                ..CsvRow::default()
            })
            .collect();
        rows.push(CsvRow {
            row: "summary",
            mode: Some(self.mode.to_string()),
            interface: Some(self.interface.to_string()),
            n_units: Some(self.n_units),
            n_gaussians: Some(self.n_gaussians),
            total_cycles: Some(self.total_cycles),
            throughput_bytes_per_sec: Some(self.throughput_bytes_per_sec),
            effective_parallel_efficiency: Some(self.effective_parallel_efficiency),
            bottleneck_kernel: Some(self.bottleneck_kernel.to_string()),
            ..CsvRow::default()
        });
        rows
    }
}

pub fn report_csv(report: &SimReport) -> Result<String, csv::Error> {
    let mut w = csv::Writer::from_writer(Vec::new());
    for row in report.csv_rows() {
        w.serialize(row)?;
    }
    let bytes = w.into_inner().map_err(|e| e.into_error())?;
    Ok(String::from_utf8(bytes).expect("csv output is utf-8"))
}

pub fn report_json(report: &SimReport) -> serde_json::Result<String> {
    serde_json::to_string_pretty(report)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::arch::Method;
    use crate::sim::RunSettings;

    #[test]
    fn csv_has_kernel_and_summary_rows() {
        let r = RunSettings::calibrated().run(Method::Window, 1).unwrap();
        let text = report_csv(&r).unwrap();
        let lines: Vec<&str> = text.lines().collect();
        assert_eq!(lines[0], REPORT_CSV_HEADER);
        assert_eq!(lines.len(), 1 + 7 + 1);
        assert!(lines[1].starts_with("kernel,dir_vec,"));
        assert!(lines[8].starts_with("summary,,,,,,,,,,analytic,window,1,100,"));
    }

    #[test]
    fn json_round_trips() {
        let r = RunSettings::calibrated().run(Method::Stream, 4).unwrap();
        let text = report_json(&r).unwrap();
        let back: SimReport = serde_json::from_str(&text).unwrap();
        assert_eq!(back, r);
    }
}
