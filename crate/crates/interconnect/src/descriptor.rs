//! `.model.json` descriptor documents.

use std::collections::BTreeMap;

use interconnect_core::registry::descriptor::classify;
use interconnect_core::registry::{
    Architecture, Capability, CapabilitySet, ModelCategory, ModelDescriptor, PerformanceLimits, SecurityProfile, Version,
};
use interconnect_core::ModelId;
use serde_json::{Map, Value};

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
pub enum DescriptorError {
    #[error("parse error at line {line}, column {column}: {message}")]
    Parse { line: usize, column: usize, message: String },
    #[error("missing field `{0}`")]
    MissingField(String),
    #[error("bad value at `{0}`")]
    BadValue(String),
}

impl DescriptorError {
    pub fn code(&self) -> &'static str {
        match self {
            DescriptorError::Parse { .. } => "parse-error",
            DescriptorError::MissingField(_) => "missing-field",
            DescriptorError::BadValue(_) => "bad-value",
        }
    }
}

type R<T> = Result<T, DescriptorError>;

const TOP: [&str; 10] = [
    "modelId",
    "modelType",
    "version",
    "architecture",
    "hyperparameters",
    "capabilities",
    "domains",
    "performance",
    "security",
    "category",
];
const ARCHITECTURE: [&str; 3] = ["family", "parameterScaleLabel", "customElements"];
const PERFORMANCE: [&str; 4] = ["rateLimitPerTick", "latencyTicks", "throughputPerTick", "maxConcurrent"];
const SECURITY: [&str; 3] = ["authMethods", "encryption", "privacyPolicy"];

fn bad<T>(path: &str) -> R<T> {
    Err(DescriptorError::BadValue(path.to_string()))
}

fn join(prefix: &str, key: &str) -> String {
    if prefix.is_empty() {
        key.to_string()
    } else {
        format!("{prefix}.{key}")
    }
}

struct Obj<'a> {
    map: &'a Map<String, Value>,
    path: &'a str,
}

impl<'a> Obj<'a> {
    fn of(v: &'a Value, path: &'a str) -> R<Self> {
        match v.as_object() {
            Some(map) => Ok(Obj { map, path }),
            None => bad(if path.is_empty() { "$" } else { path }),
        }
    }

    fn req(&self, key: &str) -> R<&'a Value> {
        self.map.get(key).ok_or_else(|| DescriptorError::MissingField(join(self.path, key)))
    }

    fn string(&self, key: &str) -> R<String> {
        match self.req(key)? {
            Value::String(s) => Ok(s.clone()),
            _ => bad(&join(self.path, key)),
        }
    }

    fn opt_string(&self, key: &str) -> R<String> {
        match self.map.get(key) {
            None => Ok(String::new()),
            Some(Value::String(s)) => Ok(s.clone()),
            Some(_) => bad(&join(self.path, key)),
        }
    }

    fn strings(&self, key: &str, required: bool) -> R<Vec<String>> {
        let v = match (self.map.get(key), required) {
            (Some(v), _) => v,
            (None, true) => return Err(DescriptorError::MissingField(join(self.path, key))),
            (None, false) => return Ok(Vec::new()),
        };
        let path = join(self.path, key);
        let items = v.as_array().ok_or_else(|| DescriptorError::BadValue(path.clone()))?;
        items
            .iter()
            .map(|i| i.as_str().map(str::to_string).ok_or_else(|| DescriptorError::BadValue(path.clone())))
            .collect()
    }

    fn positive(&self, key: &str) -> R<u64> {
        match self.req(key)?.as_u64() {
            Some(n) if n > 0 => Ok(n),
            _ => bad(&join(self.path, key)),
        }
    }

    /// Members not in `known`, stored under their dotted path as compact document text.
    fn extras(&self, known: &[&str], out: &mut BTreeMap<String, String>) {
        for (k, v) in self.map {
            if !known.contains(&k.as_str()) {
                out.insert(join(self.path, k), v.to_string());
            }
        }
    }
}

fn capability(v: &Value, extras: &mut BTreeMap<String, String>) -> R<Capability> {
    if let Value::String(name) = v {
        return Ok(Capability::named(name));
    }
    let o = Obj::of(v, "capabilities")?;
    let name = o.string("name")?;
    let mut cap = Capability::named(&name);
    if let Some(p) = o.map.get("params") {
        let params = p.as_object().ok_or_else(|| DescriptorError::BadValue("capabilities.params".into()))?;
        for (k, v) in params {
            let s = v.as_str().ok_or_else(|| DescriptorError::BadValue(format!("capabilities.params.{k}")))?;
            cap.params.insert(k.clone(), s.to_string());
        }
    }
    for (k, v) in o.map {
        if k != "name" && k != "params" {
            extras.insert(format!("capabilities[{name}].{k}"), v.to_string());
        }
    }
    Ok(cap)
}

fn scalar_text(v: &Value, path: &str) -> R<String> {
    match v {
        Value::String(s) => Ok(s.clone()),
        Value::Number(n) => Ok(n.to_string()),
        Value::Bool(b) => Ok(b.to_string()),
        _ => bad(path),
    }
}

pub fn parse_descriptor(document: &[u8]) -> Result<ModelDescriptor, DescriptorError> {
    let root: Value = serde_json::from_slice(document).map_err(|e| DescriptorError::Parse {
        line: e.line(),
        column: e.column(),
        message: e.to_string(),
    })?;
    let top = Obj::of(&root, "")?;
    let mut extras = BTreeMap::new();
    top.extras(&TOP, &mut extras);

    let model_id = ModelId::new(top.string("modelId")?).map_err(|_| DescriptorError::BadValue("modelId".into()))?;
    let model_type = top.string("modelType")?;
    let version: Version = top
        .string("version")?
        .parse()
        .map_err(|_| DescriptorError::BadValue("version".into()))?;

    let arch = Obj::of(top.req("architecture")?, "architecture")?;
    arch.extras(&ARCHITECTURE, &mut extras);
    let architecture = Architecture {
        family: arch.string("family")?,
        parameter_scale_label: arch.string("parameterScaleLabel")?,
        custom_elements: arch.strings("customElements", false)?,
    };

    let mut hyperparameters = BTreeMap::new();
    if let Some(h) = top.map.get("hyperparameters") {
        let h = Obj::of(h, "hyperparameters")?;
        for (k, v) in h.map {
            hyperparameters.insert(k.clone(), scalar_text(v, &join("hyperparameters", k))?);
        }
    }

    let caps = top
        .req("capabilities")?
        .as_array()
        .ok_or_else(|| DescriptorError::BadValue("capabilities".into()))?;
    let mut capabilities = CapabilitySet::new();
    for c in caps {
        if capabilities.insert(capability(c, &mut extras)?).is_some() {
            return bad("capabilities");
        }
    }
    let domains = top.strings("domains", true)?;

    let perf = Obj::of(top.req("performance")?, "performance")?;
    perf.extras(&PERFORMANCE, &mut extras);
    let performance = PerformanceLimits {
        rate_limit_per_tick: perf.positive("rateLimitPerTick")?,
        latency_ticks: perf.positive("latencyTicks")?,
        throughput_per_tick: perf.positive("throughputPerTick")?,
        max_concurrent: perf.positive("maxConcurrent")?,
    };

    let security = match top.map.get("security") {
        None => SecurityProfile::default(),
        Some(v) => {
            let s = Obj::of(v, "security")?;
            s.extras(&SECURITY, &mut extras);
            SecurityProfile {
                auth_methods: s.strings("authMethods", false)?,
                encryption: s.strings("encryption", false)?,
                privacy_policy: s.opt_string("privacyPolicy")?,
            }
        }
    };

    let mut d = ModelDescriptor {
        model_id,
        model_type,
        version,
        architecture,
        hyperparameters,
        capabilities,
        domains,
        performance,
        security,
        category: ModelCategory::Foundation,
        extras,
    };
    d.category = match top.map.get("category") {
        None => classify(&d),
        Some(Value::String(s)) => s.parse().map_err(|_| DescriptorError::BadValue("category".into()))?,
        Some(_) => return bad("category"),
    };
    d.validate().map_err(|e| match e {
        interconnect_core::registry::InvalidDescriptor::BadValue(p) => DescriptorError::BadValue(p),
    })?;
    Ok(d)
}

fn strings(v: &[String]) -> Value {
    Value::Array(v.iter().cloned().map(Value::String).collect())
}

fn raw(text: &str) -> Value {
    serde_json::from_str(text).unwrap_or_else(|_| Value::String(text.to_string()))
}

pub fn descriptor_value(d: &ModelDescriptor) -> Value {
    let mut arch = Map::new();
    arch.insert("family".into(), d.architecture.family.clone().into());
    arch.insert("parameterScaleLabel".into(), d.architecture.parameter_scale_label.clone().into());
    arch.insert("customElements".into(), strings(&d.architecture.custom_elements));

    let mut perf = Map::new();
    let p = &d.performance;
    for (k, v) in PERFORMANCE.iter().zip([p.rate_limit_per_tick, p.latency_ticks, p.throughput_per_tick, p.max_concurrent]) {
        perf.insert((*k).into(), v.into());
    }

    let mut sec = Map::new();
    sec.insert("authMethods".into(), strings(&d.security.auth_methods));
    sec.insert("encryption".into(), strings(&d.security.encryption));
    sec.insert("privacyPolicy".into(), d.security.privacy_policy.clone().into());

    let mut caps: Vec<Map<String, Value>> = d
        .capabilities
        .iter()
        .map(|c| {
            let mut m = Map::new();
            m.insert("name".into(), c.name.clone().into());
            if !c.params.is_empty() {
                let params = c.params.iter().map(|(k, v)| (k.clone(), Value::String(v.clone()))).collect();
                m.insert("params".into(), Value::Object(params));
            }
            m
        })
        .collect();

    let mut top = Map::new();
    for (path, text) in &d.extras {
        let value = raw(text);
        if let Some((name, key)) = path.strip_prefix("capabilities[").and_then(|r| r.split_once("].")) {
            if let Some(m) = caps.iter_mut().find(|m| m.get("name").and_then(Value::as_str) == Some(name)) {
                m.insert(key.to_string(), value);
                continue;
            }
        }
        let nested = [("architecture.", &mut arch), ("performance.", &mut perf), ("security.", &mut sec)];
        let mut placed = false;
        for (prefix, obj) in nested {
            if let Some(key) = path.strip_prefix(prefix) {
                obj.insert(key.to_string(), value.clone());
                placed = true;
                break;
            }
        }
        if !placed {
            top.insert(path.clone(), value);
        }
    }

    let caps = caps
        .into_iter()
        .map(|m| match (m.len(), m.get("name")) {
            (1, Some(n)) => n.clone(),
            _ => Value::Object(m),
        })
        .collect();

    top.insert("modelId".into(), d.model_id.to_string().into());
    top.insert("modelType".into(), d.model_type.clone().into());
    top.insert("version".into(), d.version.to_string().into());
    top.insert("architecture".into(), Value::Object(arch));
    top.insert(
        "hyperparameters".into(),
        Value::Object(d.hyperparameters.iter().map(|(k, v)| (k.clone(), Value::String(v.clone()))).collect()),
    );
    top.insert("capabilities".into(), Value::Array(caps));
    top.insert("domains".into(), strings(&d.domains));
    top.insert("performance".into(), Value::Object(perf));
    top.insert("security".into(), Value::Object(sec));
    top.insert("category".into(), d.category.as_str().into());
    Value::Object(top)
}

/// Pretty-printed document with keys in sorted order.
pub fn serialize_descriptor(d: &ModelDescriptor) -> String {
    let mut s = serde_json::to_string_pretty(&descriptor_value(d)).expect("values always serialize");
    s.push('\n');
    s
}

#[cfg(test)]
mod tests {
    use super::*;

    pub const MINIMAL: &str = r#"{
  "modelId": "nwdaf-gpt",
  "modelType": "gpt",
  "version": "2.1.0",
  "architecture": {"family": "transformer", "parameterScaleLabel": "7B"},
  "capabilities": ["traffic-prediction", {"name": "downlink-load", "params": {"scale": "percent:0..100"}}],
  "domains": ["nwdaf-analytics"],
  "performance": {"rateLimitPerTick": 5, "latencyTicks": 2, "throughputPerTick": 5, "maxConcurrent": 1}
}"#;

    #[test]
    fn minimal_document() {
        let d = parse_descriptor(MINIMAL.as_bytes()).unwrap();
        assert_eq!(d.version, Version::new(2, 1, 0));
        assert_eq!(d.category, ModelCategory::Specialized);
        assert_eq!(d.capabilities.get("downlink-load").unwrap().params["scale"], "percent:0..100");
        let again = parse_descriptor(serialize_descriptor(&d).as_bytes()).unwrap();
        assert_eq!(again, d);
    }

    #[test]
    fn missing_and_bad_fields() {
        let no_latency = MINIMAL.replace("\"latencyTicks\": 2, ", "");
        assert_eq!(
            parse_descriptor(no_latency.as_bytes()),
            Err(DescriptorError::MissingField("performance.latencyTicks".into()))
        );
        let zero = MINIMAL.replace("\"maxConcurrent\": 1", "\"maxConcurrent\": 0");
        assert_eq!(parse_descriptor(zero.as_bytes()), Err(DescriptorError::BadValue("performance.maxConcurrent".into())));
        let version = MINIMAL.replace("2.1.0", "2.1");
        assert_eq!(parse_descriptor(version.as_bytes()), Err(DescriptorError::BadValue("version".into())));
        let empty = MINIMAL.replace(
            r#"["traffic-prediction", {"name": "downlink-load", "params": {"scale": "percent:0..100"}}]"#,
            "[]",
        );
        assert_eq!(parse_descriptor(empty.as_bytes()), Err(DescriptorError::BadValue("capabilities".into())));
        match parse_descriptor(b"{\"modelId\": ") {
            Err(DescriptorError::Parse { line, .. }) => assert_eq!(line, 1),
            other => panic!("{other:?}"),
        }
    }

    #[test]
    fn unknown_members_survive() {
        let doc = MINIMAL
            .replace("\"modelType\"", "\"vendorNote\": {\"x\": [1, 2]},\n  \"modelType\"")
            .replace("\"latencyTicks\": 2", "\"latencyTicks\": 2, \"jitterTicks\": 1")
            .replace(r#""traffic-prediction""#, r#"{"name": "traffic-prediction", "horizon": "15m"}"#);
        let d = parse_descriptor(doc.as_bytes()).unwrap();
        assert_eq!(d.extras["vendorNote"], r#"{"x":[1,2]}"#);
        assert_eq!(d.extras["performance.jitterTicks"], "1");
        assert_eq!(d.extras["capabilities[traffic-prediction].horizon"], r#""15m""#);
        let text = serialize_descriptor(&d);
        assert_eq!(parse_descriptor(text.as_bytes()).unwrap(), d);
    }
}
