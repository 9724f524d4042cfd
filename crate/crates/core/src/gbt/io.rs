use std::io::Write;
use std::path::Path;

use super::{EvalReport, GbtModel, MODEL_FORMAT_VERSION};
use crate::error::{Error, Result};
use crate::groupfeatures::FeatureManifest;
use crate::modmatrix::format_sig;

pub fn model_to_json(model: &GbtModel) -> Result<String> {
    let mut s = serde_json::to_string_pretty(model)?;
    s.push('\n');
    Ok(s)
}

pub fn model_from_json(text: &str) -> Result<GbtModel> {
    let value: serde_json::Value =
        serde_json::from_str(text).map_err(|e| Error::Incompatible(format!("model file is not valid JSON: {e}")))?;
    match value.get("format_version").and_then(|v| v.as_u64()) {
        Some(v) if v == u64::from(MODEL_FORMAT_VERSION) => {}
        Some(v) => {
            return Err(Error::Incompatible(format!(
                "model format version {v}, this build reads {MODEL_FORMAT_VERSION}"
            )))
        }
        None => return Err(Error::Incompatible("model file has no format_version".into())),
    }
    let model: GbtModel =
        serde_json::from_value(value).map_err(|e| Error::Incompatible(format!("malformed model file: {e}")))?;
    if model.trees.len() != model.classes.len() {
        return Err(Error::Incompatible(format!(
            "model has {} tree lists for {} classes",
            model.trees.len(),
            model.classes.len()
        )));
    }
    Ok(model)
}

pub fn save_model(model: &GbtModel, path: impl AsRef<Path>) -> Result<()> {
    std::fs::write(path, model_to_json(model)?)?;
    Ok(())
}

pub fn load_model(path: impl AsRef<Path>) -> Result<GbtModel> {
    model_from_json(&std::fs::read_to_string(path)?)
}

/// Loads a model and checks it against the current feature manifest.
pub fn load_model_checked(path: impl AsRef<Path>, manifest: &FeatureManifest) -> Result<GbtModel> {
    let model = load_model(path)?;
    match &model.feature_manifest {
        Some(m) if m.version == manifest.version && m.hash == manifest.hash => Ok(model),
        Some(m) => Err(Error::Incompatible(format!(
            "model was trained on feature manifest version {} (hash {}), current is version {} (hash {})",
            m.version,
            &m.hash[..m.hash.len().min(12)],
            manifest.version,
            &manifest.hash[..manifest.hash.len().min(12)]
        ))),
        None => Err(Error::Incompatible("model records no feature manifest".into())),
    }
}

/// `metric,value` rows.
pub fn write_metrics<W: Write>(report: &EvalReport, w: W) -> Result<()> {
    let mut out = csv::Writer::from_writer(w);
    out.write_record(["metric", "value"])?;
    out.write_record(["accuracy", &format_sig(report.accuracy, 9)])?;
    out.write_record(["f1_weighted", &format_sig(report.f1, 9)])?;
    out.write_record(["f1_macro", &format_sig(report.f1_macro, 9)])?;
    out.write_record(["holdout_size", &report.holdout_size.to_string()])?;
    out.flush()?;
    Ok(())
}

/// Confusion matrix with truth rows and predicted columns.
pub fn write_confusion<W: Write>(report: &EvalReport, w: W) -> Result<()> {
    let mut out = csv::Writer::from_writer(w);
    let mut header = vec!["truth\\predicted".to_string()];
    header.extend(report.classes.iter().cloned());
    out.write_record(&header)?;
    for (c, row) in report.confusion.iter().enumerate() {
        let mut rec = vec![report.classes[c].clone()];
        rec.extend(row.iter().map(u64::to_string));
        out.write_record(&rec)?;
    }
    out.flush()?;
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::gbt::{train, GbtConfig};

    #[test]
    fn json_round_trip_and_errors() {
        let x: Vec<Vec<f64>> = (0..30).map(|k| vec![(k as f64 * 0.37).sin(), k as f64 / 7.0]).collect();
        let y: Vec<usize> = (0..30).map(|k| k % 3).collect();
        let cfg = GbtConfig { n_estimators: 5, ..GbtConfig::default() };
        let m = train(&x, &y, vec!["a".into(), "b".into(), "c".into()], &cfg).unwrap();
        let text = model_to_json(&m).unwrap();
        let back = model_from_json(&text).unwrap();
        for row in &x {
            assert_eq!(back.predict_proba(row).unwrap(), m.predict_proba(row).unwrap());
        }
        assert!(model_from_json(&text[..text.len() / 2]).is_err());
        let bumped = text.replacen("\"format_version\": 1", "\"format_version\": 2", 1);
        assert!(matches!(model_from_json(&bumped), Err(Error::Incompatible(_))));
    }
}
