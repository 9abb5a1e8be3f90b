//! Service manifest: the declarative description of services, their base
//! routes, endpoints, inter-service calls and internal function flows.

use alloc::collections::BTreeSet;
use alloc::format;
use alloc::string::String;
use alloc::vec::Vec;

use serde::{Deserialize, Serialize};
use thiserror::Error;

const HTTP_METHODS: &[&str] = &[
    "GET", "POST", "PUT", "PATCH", "DELETE", "HEAD", "OPTIONS", "TRACE", "CONNECT",
];

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ServiceManifest {
    pub system_name: String,
    #[serde(default)]
    pub services: Vec<ServiceDecl>,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ServiceDecl {
    pub name: String,
    pub base_route: String,
    /// Explicit controller key. When absent the base route is the key.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub controller: Option<String>,
    #[serde(default)]
    pub endpoints: Vec<EndpointDecl>,
    #[serde(default)]
    pub functions: Vec<FunctionDecl>,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct EndpointDecl {
    pub method: String,
    pub path: String,
    #[serde(default)]
    pub calls: Vec<CallDecl>,
    #[serde(default)]
    pub flow: Vec<FunctionStep>,
}

/// A call from an endpoint to an endpoint of another (or the same) service.
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Serialize, Deserialize)]
pub struct CallDecl {
    pub service: String,
    /// Target endpoint id, `"<METHOD> <path>"`.
    pub endpoint: String,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct FunctionDecl {
    pub name: String,
}

/// One numbered step of an endpoint's internal flow.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct FunctionStep {
    pub seq: u32,
    pub function: String,
    #[serde(default)]
    pub calls: Vec<String>,
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum ManifestError {
    #[error("{at}: duplicate service `{name}`")]
    DuplicateService { name: String, at: String },
    #[error("{at}: call target `{target}` does not exist")]
    DanglingCallTarget { target: String, at: String },
    #[error("{at}: route `{route}` must be non-empty and start with `/`")]
    BadRoute { route: String, at: String },
    #[error("{at}: `{method}` is not an HTTP method")]
    BadMethod { method: String, at: String },
    #[error("{at}: duplicate endpoint `{endpoint}`")]
    DuplicateEndpoint { endpoint: String, at: String },
    #[error("{at}: duplicate function `{function}`")]
    DuplicateFunction { function: String, at: String },
    #[error("{at}: flow sequence number {found} where {expected} or later was expected")]
    BadFlowSequence {
        found: u32,
        expected: u32,
        at: String,
    },
    #[error("{at}: flow references unknown function `{function}`")]
    UnknownFlowFunction { function: String, at: String },
}

impl ManifestError {
    /// JSON path of the offending element, e.g. `services[2].endpoints[0]`.
    pub fn at(&self) -> &str {
        match self {
            ManifestError::DuplicateService { at, .. }
            | ManifestError::DanglingCallTarget { at, .. }
            | ManifestError::BadRoute { at, .. }
            | ManifestError::BadMethod { at, .. }
            | ManifestError::DuplicateEndpoint { at, .. }
            | ManifestError::DuplicateFunction { at, .. }
            | ManifestError::BadFlowSequence { at, .. }
            | ManifestError::UnknownFlowFunction { at, .. } => at,
        }
    }
}

impl ServiceManifest {
    pub fn service(&self, name: &str) -> Option<&ServiceDecl> {
        self.services.iter().find(|s| s.name == name)
    }

    /// Checks every structural invariant. The first violation found in
    /// document order is reported.
    pub fn validate(&self) -> Result<(), ManifestError> {
        let mut names = BTreeSet::new();
        for (i, svc) in self.services.iter().enumerate() {
            if !names.insert(svc.name.as_str()) {
                return Err(ManifestError::DuplicateService {
                    name: svc.name.clone(),
                    at: format!("services[{i}].name"),
                });
            }
        }

        for (i, svc) in self.services.iter().enumerate() {
            let at = format!("services[{i}]");
            check_route(&svc.base_route, &format!("{at}.base_route"))?;

            let mut functions = BTreeSet::new();
            for (f, func) in svc.functions.iter().enumerate() {
                if !functions.insert(func.name.as_str()) {
                    return Err(ManifestError::DuplicateFunction {
                        function: func.name.clone(),
                        at: format!("{at}.functions[{f}]"),
                    });
                }
            }

            let mut endpoint_ids = BTreeSet::new();
            for (e, ep) in svc.endpoints.iter().enumerate() {
                let ep_at = format!("{at}.endpoints[{e}]");
                if !HTTP_METHODS.contains(&ep.method.as_str()) {
                    return Err(ManifestError::BadMethod {
                        method: ep.method.clone(),
                        at: format!("{ep_at}.method"),
                    });
                }
                check_route(&ep.path, &format!("{ep_at}.path"))?;
                if !endpoint_ids.insert(ep.id()) {
                    return Err(ManifestError::DuplicateEndpoint {
                        endpoint: ep.id(),
                        at: ep_at,
                    });
                }

                for (c, call) in ep.calls.iter().enumerate() {
                    let call_at = format!("{ep_at}.calls[{c}]");
                    let Some(target) = self.service(&call.service) else {
                        return Err(ManifestError::DanglingCallTarget {
                            target: call.service.clone(),
                            at: call_at,
                        });
                    };
                    if target.endpoint(&call.endpoint).is_none() {
                        return Err(ManifestError::DanglingCallTarget {
                            target: format!("{} {}", call.service, call.endpoint),
                            at: call_at,
                        });
                    }
                }

                let mut expected = 1;
                for (s, step) in ep.flow.iter().enumerate() {
                    let step_at = format!("{ep_at}.flow[{s}]");
                    if step.seq < expected || (s == 0 && step.seq != 1) {
                        return Err(ManifestError::BadFlowSequence {
                            found: step.seq,
                            expected,
                            at: step_at,
                        });
                    }
                    expected = step.seq + 1;
                    for name in core::iter::once(&step.function).chain(step.calls.iter()) {
                        if !functions.contains(name.as_str()) {
                            return Err(ManifestError::UnknownFlowFunction {
                                function: name.clone(),
                                at: step_at,
                            });
                        }
                    }
                }
            }
        }
        Ok(())
    }
}

fn check_route(route: &str, at: &str) -> Result<(), ManifestError> {
    if route.starts_with('/') {
        Ok(())
    } else {
        Err(ManifestError::BadRoute {
            route: route.into(),
            at: at.into(),
        })
    }
}

impl ServiceDecl {
    /// Controller grouping key: the explicit override, else the base route.
    pub fn controller_key(&self) -> &str {
        self.controller.as_deref().unwrap_or(&self.base_route)
    }

    pub fn endpoint(&self, id: &str) -> Option<&EndpointDecl> {
        self.endpoints.iter().find(|e| e.id() == id)
    }
}

impl EndpointDecl {
    /// `"<METHOD> <path>"`
    pub fn id(&self) -> String {
        format!("{} {}", self.method, self.path)
    }
}
