//! Chat-format fine-tuning export.

use std::io::Write;
use std::path::Path;

use nlicurate::digest::file_digest;
use nlicurate::domain::NliInstance;
use nlicurate::modelgate::TemplateStore;
use nlicurate::{Error, Result};
use serde_json::json;

pub const FINETUNE_TEMPLATE: &str = "classify_finetuned";

/// Renders one JSON line per instance: a user message with the rendered
/// pair and an assistant message with the bare label word.
pub fn render_finetune(
    instances: &[NliInstance],
    templates: &TemplateStore,
    template_id: &str,
) -> Result<Vec<u8>> {
    let mut out = Vec::new();
    for inst in instances {
        let label = inst.label.ok_or_else(|| {
            Error::Validation(format!("instance {} has no label to export", inst.id))
        })?;
        let user = templates.render(
            template_id,
            &[("premise", &inst.premise), ("hypothesis", &inst.hypothesis)],
        )?;
        let record = json!({
            "messages": [
                {"role": "user", "content": user},
                {"role": "assistant", "content": label.as_str()},
            ]
        });
        serde_json::to_writer(&mut out, &record)?;
        out.push(b'\n');
    }
    Ok(out)
}

/// Writes the training file and returns its digest.
pub fn export_finetune(
    instances: &[NliInstance],
    templates: &TemplateStore,
    template_id: &str,
    path: &Path,
) -> Result<String> {
    let body = render_finetune(instances, templates, template_id)?;
    if let Some(parent) = path.parent() {
        std::fs::create_dir_all(parent)?;
    }
    std::fs::File::create(path)?.write_all(&body)?;
    Ok(file_digest(path)?)
}
