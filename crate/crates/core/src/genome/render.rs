//! Phenotype: turning an individual into concrete HTTP calls.

use std::collections::BTreeMap;

use log::debug;
use percent_encoding::{utf8_percent_encode, AsciiSet, NON_ALPHANUMERIC};

use crate::executor::{resolve_location, CallLink, ConcreteHttpCall};
use crate::schema::PathSegment;

use super::individual::{Individual, ParamLocation};

/// Characters left unescaped in a path segment (RFC 3986 unreserved).
const SEGMENT: &AsciiSet = &NON_ALPHANUMERIC.remove(b'-').remove(b'.').remove(b'_').remove(b'~');

/// Renders every action. `resolved_locations` maps a creation action's index to
/// the location it returned.
pub fn render(
    ind: &Individual,
    base_url: &str,
    resolved_locations: &BTreeMap<usize, String>,
) -> Vec<ConcreteHttpCall> {
    (0..ind.len())
        .map(|i| render_action(ind, i, base_url, resolved_locations))
        .collect()
}

/// Renders action `index` alone; used by the executor as locations become known.
pub fn render_action(
    ind: &Individual,
    index: usize,
    base_url: &str,
    resolved_locations: &BTreeMap<usize, String>,
) -> ConcreteHttpCall {
    let action = &ind.actions[index];
    let template = &action.template;

    let mut own_path = template.base_path.clone();
    for seg in template.path.segments() {
        own_path.push('/');
        match seg {
            PathSegment::Literal(l) => own_path.push_str(l),
            PathSegment::Placeholder(name) => {
                let value = action
                    .gene(ParamLocation::Path, name)
                    .and_then(|g| g.to_param_string())
                    .unwrap_or_default();
                own_path.extend(utf8_percent_encode(&value, SEGMENT));
            }
        }
    }
    if own_path.is_empty() {
        own_path.push('/');
    }

    let mut path = own_path.clone();
    let link = action.path_override.as_ref().map(|l| {
        let saved = resolved_locations.get(&l.source_action);
        let resolved = match saved.map(|s| resolve_location(s, &own_path, &l.creation_path)) {
            Some(Ok(p)) => {
                path = p;
                true
            }
            Some(Err(e)) => {
                debug!("falling back to {own_path}: {e}");
                false
            }
            None => false,
        };
        CallLink { source_action: l.source_action, unresolved_path: own_path.clone(), resolved }
    });

    let collect = |location| {
        action
            .genes
            .iter()
            .filter(|g| g.location == location)
            .filter_map(|g| g.gene.to_param_string().map(|v| (g.name.clone(), v)))
            .collect::<Vec<_>>()
    };
    let query = collect(ParamLocation::Query);
    let mut headers: Vec<(String, String)> = Vec::new();
    for (name, value) in collect(ParamLocation::Header) {
        headers.retain(|(n, _)| !n.eq_ignore_ascii_case(&name));
        headers.push((name, value));
    }
    let body = action
        .genes
        .iter()
        .find(|g| g.location == ParamLocation::Body)
        .and_then(|g| g.gene.to_json())
        .map(|v| v.to_string());

    ConcreteHttpCall {
        verb: template.verb,
        base_url: base_url.trim_end_matches('/').to_string(),
        path,
        query,
        headers,
        body,
        auth_label: None,
        link,
    }
}
