use serde::{Deserialize, Serialize};

use super::EvalError;

pub const Z_95: f64 = 1.96;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, clap::ValueEnum)]
#[serde(rename_all = "lowercase")]
pub enum CiMethod {
    /// `1.96 * sqrt(p (1 - p) / n_ref)`
    Binomial,
    /// `1.96 * std_error`
    Fold,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EvaluationReport {
    pub model: String,
    pub fold_accuracies: Vec<f64>,
    pub mean_accuracy: f64,
    pub std_dev: f64,
    pub std_error: f64,
    pub ci_halfwidth: f64,
    pub ci_method: CiMethod,
    pub n_ref: usize,
    /// Accuracy on the held-out partition, when the protocol has one.
    pub test_accuracy: Option<f64>,
    pub n_test: Option<usize>,
}

pub fn binomial_ci_halfwidth(p: f64, n_ref: usize) -> f64 {
    Z_95 * (p * (1.0 - p) / n_ref as f64).sqrt()
}

/// Mean, sample standard deviation, standard error and CI of fold accuracies.
pub fn summarize(model: &str, fold_accuracies: &[f64], n_ref: usize, ci_method: CiMethod) -> Result<EvaluationReport, EvalError> {
    let k = fold_accuracies.len();
    if k < 2 {
        return Err(EvalError::BadK(k));
    }
    if n_ref == 0 {
        return Err(EvalError::BadNRef);
    }
    let kf = k as f64;
    let mean = fold_accuracies.iter().sum::<f64>() / kf;
    let var = fold_accuracies.iter().map(|a| (a - mean).powi(2)).sum::<f64>() / (kf - 1.0);
    let std_dev = var.sqrt();
    let std_error = std_dev / kf.sqrt();
    let ci_halfwidth = match ci_method {
        CiMethod::Binomial => binomial_ci_halfwidth(mean, n_ref),
        CiMethod::Fold => Z_95 * std_error,
    };
    Ok(EvaluationReport {
        model: model.to_string(),
        fold_accuracies: fold_accuracies.to_vec(),
        mean_accuracy: mean,
        std_dev,
        std_error,
        ci_halfwidth,
        ci_method,
        n_ref,
        test_accuracy: None,
        n_test: None,
    })
}

/// `fraction` as a percentage string with `decimals` places, halves rounded up.
pub fn percent(fraction: f64, decimals: u32) -> String {
    let scale = 10f64.powi(decimals as i32);
    // nudge by a few ulps so values like 0.0054999999 from float noise round as printed
    let scaled = fraction * 100.0 * scale;
    let rounded = (scaled + 0.5 + scaled.abs() * 1e-12).floor() / scale;
    format!("{:.*}%", decimals as usize, rounded)
}

pub const MEAN_DECIMALS: u32 = 1;
pub const SPREAD_DECIMALS: u32 = 2;

/// Markdown table, one row per report in the given order.
pub fn emit_markdown(reports: &[EvaluationReport]) -> Result<String, EvalError> {
    if reports.is_empty() {
        return Err(EvalError::EmptyReport);
    }
    let with_test = reports.iter().any(|r| r.test_accuracy.is_some());
    let mut out = String::from("| Model | Mean Accuracy ± CI | Std. Dev. | Std. Error |");
    if with_test {
        out.push_str(" Test Accuracy |");
    }
    out.push_str("\n|---|---|---|---|");
    if with_test {
        out.push_str("---|");
    }
    out.push('\n');
    for r in reports {
        out.push_str(&format!(
            "| {} | {} ± {} | {} | {} |",
            r.model,
            percent(r.mean_accuracy, MEAN_DECIMALS),
            percent(r.ci_halfwidth, SPREAD_DECIMALS),
            percent(r.std_dev, SPREAD_DECIMALS),
            percent(r.std_error, SPREAD_DECIMALS),
        ));
        if with_test {
            match r.test_accuracy {
                Some(t) => out.push_str(&format!(" {} |", percent(t, MEAN_DECIMALS))),
                None => out.push_str(" - |"),
            }
        }
        out.push('\n');
    }
    Ok(out)
}

#[derive(Serialize, Deserialize)]
struct ReportDoc {
    reports: Vec<EvaluationReport>,
}

pub fn emit_json(reports: &[EvaluationReport]) -> Result<String, EvalError> {
    if reports.is_empty() {
        return Err(EvalError::EmptyReport);
    }
    let mut s = serde_json::to_string_pretty(&ReportDoc { reports: reports.to_vec() })?;
    s.push('\n');
    Ok(s)
}

pub fn parse_json(text: &str) -> Result<Vec<EvaluationReport>, EvalError> {
    Ok(serde_json::from_str::<ReportDoc>(text)?.reports)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn closed_forms() {
        let accs = [0.70, 0.72, 0.74, 0.76, 0.78, 0.71, 0.73, 0.75, 0.77, 0.79];
        let r = summarize("x", &accs, 5000, CiMethod::Binomial).unwrap();
        assert!((r.std_error - r.std_dev / 10f64.sqrt()).abs() < 1e-15);
        assert!((r.ci_halfwidth - 1.96 * (r.mean_accuracy * (1.0 - r.mean_accuracy) / 5000.0).sqrt()).abs() < 1e-12);
        let f = summarize("x", &accs, 5000, CiMethod::Fold).unwrap();
        assert!((f.ci_halfwidth - 1.96 * f.std_error).abs() < 1e-15);
        assert!(summarize("x", &[0.5], 10, CiMethod::Fold).is_err());
    }

    #[test]
    fn half_up() {
        assert_eq!(percent(0.754, 1), "75.4%");
        assert_eq!(percent(0.00125, 2), "0.13%");
        assert_eq!(percent(0.0166, 2), "1.66%");
        assert_eq!(percent(0.5, 0), "50%");
    }

    #[test]
    fn table_rows_in_order() {
        let a = summarize("B", &[0.7, 0.8], 100, CiMethod::Binomial).unwrap();
        let b = summarize("A", &[0.6, 0.6], 100, CiMethod::Binomial).unwrap();
        let md = emit_markdown(&[a.clone(), b.clone()]).unwrap();
        let rows: Vec<&str> = md.lines().collect();
        assert_eq!(rows.len(), 4);
        assert!(rows[2].starts_with("| B |") && rows[3].starts_with("| A |"));
        assert_eq!(emit_markdown(std::slice::from_ref(&a)).unwrap().lines().count(), 3);
        assert!(emit_markdown(&[]).is_err());
        assert_eq!(parse_json(&emit_json(&[a.clone(), b]).unwrap()).unwrap()[0], a);
    }
}
