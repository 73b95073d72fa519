//! Per-variable results laid out for external plotting.
//!
//! The export is a delimited table of inclusion probabilities and averaged
//! coefficients, arranged in blocks by group label so a plotting script can
//! draw one track per group (chromosomes, annotation classes, and so on).

use std::collections::HashMap;
use std::path::Path;

use crate::error::{Error, Result};
use crate::model::ModelFit;

/// Variable-to-group assignments. `order` records the labels by first
/// appearance in the groups file; the export emits blocks in that order.
#[derive(Debug)]
pub struct GroupMap {
    assign: HashMap<String, String>,
    order: Vec<String>,
}

/// Reads a two-column delimited file of `variable,group` pairs.
pub fn load_groups(path: &Path) -> Result<GroupMap> {
    let text = std::fs::read_to_string(path).map_err(|source| Error::Io {
        path: path.display().to_string(),
        source,
    })?;
    let shown = path.display();
    let mut assign = HashMap::new();
    let mut order: Vec<String> = Vec::new();
    for (lineno, raw) in text.lines().enumerate() {
        let line = raw.trim_end_matches('\r');
        if line.trim().is_empty() {
            continue;
        }
        let delim = if line.contains('\t') { '\t' } else { ',' };
        let fields: Vec<&str> = line.split(delim).map(str::trim).collect();
        if fields.len() != 2 {
            return Err(Error::Data(format!(
                "{shown}: line {}: expected 2 fields, found {}",
                lineno + 1,
                fields.len()
            )));
        }
        let (name, group) = (fields[0].to_string(), fields[1].to_string());
        if !order.contains(&group) {
            order.push(group.clone());
        }
        assign.insert(name, group);
    }
    Ok(GroupMap { assign, order })
}

/// Renders the plot-data table: one row per variable with columns
/// `index,name,group,pip,beta_mean,highlight`, ordered by group block and
/// original index within each block. Variables without a group land in
/// a final "all" block; without a groups file, everything is "all".
pub fn plot_data(fit: &ModelFit, groups: Option<&GroupMap>, highlight: &[String]) -> Result<String> {
    for name in highlight {
        if !fit.names.contains(name) {
            return Err(Error::Data(format!("unknown variable name '{name}'")));
        }
    }
    let marked: std::collections::HashSet<&String> = highlight.iter().collect();

    let group_of = |name: &String| -> &str {
        groups
            .and_then(|g| g.assign.get(name))
            .map_or("all", String::as_str)
    };
    let mut labels: Vec<&str> = groups.map_or_else(Vec::new, |g| {
        g.order.iter().map(String::as_str).collect()
    });
    if fit.names.iter().any(|n| group_of(n) == "all") && !labels.contains(&"all") {
        labels.push("all");
    }

    let mut out = String::from("index,name,group,pip,beta_mean,highlight\n");
    for label in labels {
        for (i, name) in fit.names.iter().enumerate() {
            if group_of(name) != label {
                continue;
            }
            out.push_str(&format!(
                "{},{},{},{},{},{}\n",
                i + 1,
                name,
                label,
                fit.pip[i],
                fit.beta_mean[i],
                u8::from(marked.contains(name))
            ));
        }
    }
    Ok(out)
}
