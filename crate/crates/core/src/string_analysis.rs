//! String analysis producing the URL Map.
//!
//! Static parts (literals, resource strings, settings and variables whose every definition
//! yields the same constant) are resolved to concrete strings by following use-definition
//! chains. Any other variable part is left to runtime: the analysis records *all* of its
//! program-wide definitions as Definition Spots, and the instrumented app reports whichever
//! one actually executes. Last write wins, so over-approximating the set is safe.

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use crate::app_ir::{App, StaticSource, Stmt, UrlId, UrlPart};

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
pub enum AnalysisError {
    #[error("resource `{0}` is not defined in the app's resources")]
    MissingResource(String),
    #[error("setting `{0}` is not defined in the app's settings")]
    MissingSetting(String),
    #[error("variable `{0}` is never defined")]
    UndefinedVariable(String),
}

/// The `n`-th program-order definition feeding part `m` of a URL.
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Serialize, Deserialize)]
pub struct DefinitionSpot {
    pub container: String,
    #[serde(rename = "stmt")]
    pub stmt_index: usize,
    pub m: usize,
    pub n: usize,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum UrlPartState {
    Concrete(String),
    #[serde(rename = "spots")]
    Unknown(Vec<DefinitionSpot>),
}

impl UrlPartState {
    pub fn concrete(&self) -> Option<&str> {
        match self {
            UrlPartState::Concrete(s) => Some(s),
            UrlPartState::Unknown(_) => None,
        }
    }
}

/// Per-URL list of part states, in URL Spot order.
#[derive(Debug, Clone, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(transparent)]
pub struct UrlMap {
    pub entries: BTreeMap<UrlId, Vec<UrlPartState>>,
}

impl UrlMap {
    pub fn get(&self, url: &str) -> Option<&[UrlPartState]> {
        self.entries.get(url).map(Vec::as_slice)
    }

    /// `(url, m)` pairs served by the definition at `container[stmt_index]`.
    pub fn parts_defined_at(&self, container: &str, stmt_index: usize) -> Vec<(UrlId, usize)> {
        let mut out = Vec::new();
        for (url, parts) in &self.entries {
            for (i, part) in parts.iter().enumerate() {
                if let UrlPartState::Unknown(spots) = part {
                    if spots
                        .iter()
                        .any(|s| s.container == container && s.stmt_index == stmt_index)
                    {
                        out.push((url.clone(), i + 1));
                    }
                }
            }
        }
        out
    }

    /// All Definition Spots across the map.
    pub fn spots(&self) -> impl Iterator<Item = (&UrlId, &DefinitionSpot)> {
        self.entries.iter().flat_map(|(url, parts)| {
            parts.iter().flat_map(move |p| match p {
                UrlPartState::Unknown(spots) => spots.iter().map(move |s| (url, s)).collect(),
                UrlPartState::Concrete(_) => Vec::new(),
            })
        })
    }

    pub fn is_fully_static(&self, url: &str) -> bool {
        self.get(url)
            .is_some_and(|parts| parts.iter().all(|p| p.concrete().is_some()))
    }
}

pub(crate) fn resolve_source(app: &App, source: &StaticSource) -> Result<String, AnalysisError> {
    match source {
        StaticSource::Literal(s) => Ok(s.clone()),
        StaticSource::Resource(k) => app
            .resources
            .get(k)
            .cloned()
            .ok_or_else(|| AnalysisError::MissingResource(k.clone())),
        StaticSource::Setting(k) => app
            .settings
            .get(k)
            .cloned()
            .ok_or_else(|| AnalysisError::MissingSetting(k.clone())),
    }
}

/// Definitions of `var` in program order, as `(container, stmt_index, stmt)`.
fn definitions<'a>(app: &'a App, var: &'a str) -> impl Iterator<Item = (&'a str, usize, &'a Stmt)> {
    app.statements()
        .filter(move |(_, _, s)| s.defined_var() == Some(var))
}

/// Constant value of `var` if every definition of it is static and they all agree.
pub fn static_value_of(app: &App, var: &str) -> Result<Option<String>, AnalysisError> {
    let mut value: Option<String> = None;
    let mut any = false;
    let mut dynamic = false;
    for (_, _, stmt) in definitions(app, var) {
        any = true;
        match stmt {
            Stmt::DefineStatic { source, .. } => {
                let v = resolve_source(app, source)?;
                match &value {
                    Some(prev) if *prev != v => dynamic = true,
                    _ => value = Some(v),
                }
            }
            _ => dynamic = true,
        }
    }
    if !any {
        return Err(AnalysisError::UndefinedVariable(var.to_string()));
    }
    Ok(if dynamic { None } else { value })
}

/// Builds the URL Map for every URL Spot in the app.
pub fn analyze_urls(app: &App) -> Result<UrlMap, AnalysisError> {
    let mut map = UrlMap::default();
    for (_, _, stmt) in app.statements() {
        let Stmt::BuildUrl { url, parts } = stmt else {
            continue;
        };
        let mut states = Vec::with_capacity(parts.len());
        for (i, part) in parts.iter().enumerate() {
            let state = match part {
                UrlPart::Literal(s) => UrlPartState::Concrete(s.clone()),
                UrlPart::Resource(k) => {
                    UrlPartState::Concrete(resolve_source(app, &StaticSource::Resource(k.clone()))?)
                }
                UrlPart::Var(v) => match static_value_of(app, v)? {
                    Some(s) => UrlPartState::Concrete(s),
                    None => UrlPartState::Unknown(
                        definitions(app, v)
                            .enumerate()
                            .map(|(n, (container, stmt_index, _))| DefinitionSpot {
                                container: container.to_string(),
                                stmt_index,
                                m: i + 1,
                                n: n + 1,
                            })
                            .collect(),
                    ),
                },
            };
            states.push(state);
        }
        map.entries.insert(url.clone(), states);
    }
    Ok(map)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::app_ir::parse_app;
    use crate::fixtures::weather;

    #[test]
    fn weather_url2_entry() {
        let map = analyze_urls(&weather()).unwrap();
        assert_eq!(
            map.get("url2").unwrap(),
            &[
                UrlPartState::Concrete("http://weatherapi/".into()),
                UrlPartState::Concrete("weather?&cityName=".into()),
                UrlPartState::Unknown(vec![DefinitionSpot {
                    container: "onItemSelected".into(),
                    stmt_index: 0,
                    m: 3,
                    n: 1,
                }]),
            ]
        );
        assert!(map.is_fully_static("url1"));
        assert_eq!(map.get("url1").unwrap()[2].concrete(), Some("123"));
    }

    #[test]
    fn all_literal_url_has_no_spots() {
        let app = parse_app("app x\ncallback a { url u = \"http://h/\" + \"p\" }\n").unwrap();
        let map = analyze_urls(&app).unwrap();
        assert!(map.is_fully_static("u"));
        assert_eq!(map.spots().count(), 0);
    }

    #[test]
    fn two_dynamic_definitions_numbered_in_program_order() {
        let src = "app x\n\
            callback first { let q = input(a) }\n\
            callback second { let z = \"pad\"; let q = input(b); url u = \"h/\" + q }\n";
        let app = parse_app(src).unwrap();
        let map = analyze_urls(&app).unwrap();

        // Oracle: independent linear scan over all statements.
        let mut expected = Vec::new();
        for body in app.callbacks.iter().chain(app.methods.iter()) {
            for (i, s) in body.stmts.iter().enumerate() {
                if let Stmt::DefineDynamic { var, .. } | Stmt::DefineStatic { var, .. } = s {
                    if var == "q" {
                        expected.push((body.name.clone(), i));
                    }
                }
            }
        }
        assert_eq!(expected, vec![("first".into(), 0), ("second".into(), 1)]);

        let UrlPartState::Unknown(spots) = &map.get("u").unwrap()[1] else {
            panic!("expected unknown part");
        };
        let got: Vec<_> = spots
            .iter()
            .map(|s| ((s.container.clone(), s.stmt_index), s.m, s.n))
            .collect();
        assert_eq!(
            got,
            expected
                .into_iter()
                .enumerate()
                .map(|(k, loc)| (loc, 2, k + 1))
                .collect::<Vec<_>>()
        );
    }

    #[test]
    fn static_values() {
        let app = weather();
        assert_eq!(
            static_value_of(&app, "favCityId").unwrap(),
            Some("123".into())
        );
        assert_eq!(static_value_of(&app, "cityName").unwrap(), None);
        assert_eq!(
            static_value_of(&app, "nope"),
            Err(AnalysisError::UndefinedVariable("nope".into()))
        );
    }

    #[test]
    fn conflicting_constants_are_not_static() {
        let app = parse_app("app x\ncallback a { let v = \"a\" }\ncallback b { let v = \"b\" }\n")
            .unwrap();
        assert_eq!(static_value_of(&app, "v").unwrap(), None);
        let app = parse_app("app x\ncallback a { let v = \"a\" }\ncallback b { let v = \"a\" }\n")
            .unwrap();
        assert_eq!(static_value_of(&app, "v").unwrap(), Some("a".into()));
    }

    #[test]
    fn mixed_static_and_dynamic_demotes_to_spots() {
        let app = parse_app(
            "app x\ncallback a { let v = \"a\" }\ncallback b { let v = input(t); url u = v }\n",
        )
        .unwrap();
        let map = analyze_urls(&app).unwrap();
        let UrlPartState::Unknown(spots) = &map.get("u").unwrap()[0] else {
            panic!()
        };
        assert_eq!(spots.len(), 2);
        assert_eq!(spots[0].container, "a");
    }

    #[test]
    fn missing_resource_is_reported() {
        let app = parse_app("app x\ncallback a { url u = resource(host) + \"/p\" }\n").unwrap();
        assert_eq!(
            analyze_urls(&app),
            Err(AnalysisError::MissingResource("host".into()))
        );
    }

    #[test]
    fn shared_definition_serves_several_urls() {
        let app = parse_app(
            "app x\ncallback a { let v = input(t) }\ncallback b { url p = \"x\" + v; url q = \"y\" + \"z\" + v }\n",
        )
        .unwrap();
        let map = analyze_urls(&app).unwrap();
        assert_eq!(
            map.parts_defined_at("a", 0),
            vec![("p".to_string(), 2), ("q".to_string(), 3)]
        );
    }

    #[test]
    fn json_shape() {
        let map = analyze_urls(&weather()).unwrap();
        let json = serde_json::to_value(&map).unwrap();
        assert_eq!(
            json["url2"][0],
            serde_json::json!({"concrete": "http://weatherapi/"})
        );
        assert_eq!(
            json["url2"][2],
            serde_json::json!({"spots": [{"container": "onItemSelected", "stmt": 0, "m": 3, "n": 1}]})
        );
    }
}
