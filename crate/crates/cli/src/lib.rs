//! Headless driver. Every engine mutation the HTTP API offers has a
//! subcommand here, next to scenario replay and `serve`.

use std::ffi::OsString;
use std::io::Write;
use std::net::SocketAddr;
use std::path::{Path, PathBuf};
use std::sync::Arc;

use clap::{CommandFactory, Parser, Subcommand, ValueEnum};
use serde_json::{json, Value};

use scenecraft_core::llm::{LiveBackend, LiveConfig, LlmBackend, MockBackend};
use scenecraft_core::project::{AssetUpload, GenerationSettings};
use scenecraft_core::prompt::FrameworkId;
use scenecraft_core::scenario::replay;
use scenecraft_core::scene::{ElementId, ElementKind, Point, ProxyKind, Transform, CANVAS_HEIGHT, CANVAS_WIDTH};
use scenecraft_core::{store, Engine, EngineConfig, Error, Project};
use scenecraft_server::ServeError;

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum BackendChoice {
    Mock,
    Live,
}

#[derive(Debug, Parser)]
#[command(name = "scenecraft", version, about = "Element-level scene generation engine")]
pub struct Cli {
    /// Project directory.
    #[arg(long, global = true, default_value = ".")]
    pub dir: PathBuf,
    #[arg(long, global = true, value_enum, default_value = "mock")]
    pub backend: BackendChoice,
    /// Fixture directory for the mock backend. Defaults to `<dir>/fixtures`,
    /// or the scenario's `fixtures/` when replaying.
    #[arg(long, global = true)]
    pub fixtures: Option<PathBuf>,
    /// Wait for generation to finish. Commands here always run to
    /// completion, so this only mirrors the HTTP `?wait=true` switch.
    #[arg(long, global = true)]
    pub wait: bool,
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Create an empty project in --dir.
    Init {
        #[arg(long)]
        name: String,
        /// Fix the framework now instead of inferring it from the first
        /// central prompt.
        #[arg(long)]
        framework: Option<FrameworkId>,
    },
    /// Print the scene: elements, proxies and framework.
    Scene,
    AddElement {
        name: String,
        #[arg(long, default_value = "llm-generated")]
        kind: ElementKind,
        /// Image file for uploaded images and sketches.
        #[arg(long)]
        asset: Option<PathBuf>,
        /// Comma-separated member ids or names, for groups.
        #[arg(long, value_delimiter = ',')]
        members: Vec<String>,
    },
    DeleteElement {
        element: String,
    },
    /// Change an element's transform. Omitted fields keep their value.
    SetTransform {
        element: String,
        #[arg(long, allow_negative_numbers = true)]
        x: Option<f64>,
        #[arg(long, allow_negative_numbers = true)]
        y: Option<f64>,
        #[arg(long, allow_negative_numbers = true)]
        rotation: Option<f64>,
        #[arg(long)]
        scale: Option<f64>,
    },
    /// Add a point, line, curve or region given as `x,y` pairs.
    AddProxy {
        kind: ProxyKind,
        #[arg(required = true, value_parser = parse_point, allow_negative_numbers = true)]
        points: Vec<Point>,
    },
    DeleteProxy {
        label: String,
    },
    /// Send a prompt to `central` or to an element module.
    Prompt {
        module: String,
        text: String,
    },
    SetSlider {
        element: String,
        variable: String,
        #[arg(allow_negative_numbers = true)]
        value: f64,
    },
    /// Print an element's slider manifest.
    Sliders {
        element: String,
    },
    /// Print the compiled context, or the summaries with --json.
    Context {
        #[arg(long)]
        json: bool,
    },
    /// Print a module's transcript.
    Session {
        module: String,
    },
    /// Write the runnable bundle to a directory and optionally a zip file.
    Export {
        #[arg(long)]
        out: Option<PathBuf>,
        #[arg(long)]
        zip: Option<PathBuf>,
    },
    /// Replay a scenario directory into a fresh project.
    Replay {
        scenario: PathBuf,
        /// Keep the resulting project here (must be empty or missing).
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Serve the project over HTTP.
    Serve {
        #[arg(long, default_value = "127.0.0.1")]
        host: std::net::IpAddr,
        #[arg(long, default_value_t = 8080)]
        port: u16,
    },
}

/// HTTP endpoint to subcommand, for every endpoint a client can call.
pub const PARITY: &[(&str, &str, &str)] = &[
    ("GET", "/scene", "scene"),
    ("POST", "/elements", "add-element"),
    ("DELETE", "/elements/{id}", "delete-element"),
    ("PATCH", "/elements/{id}/transform", "set-transform"),
    ("POST", "/proxies", "add-proxy"),
    ("DELETE", "/proxies/{label}", "delete-proxy"),
    ("POST", "/modules/{id}/prompt", "prompt"),
    ("GET", "/modules/{id}/session", "session"),
    ("GET", "/context", "context"),
    ("GET", "/sliders/{element}", "sliders"),
    ("PATCH", "/sliders", "set-slider"),
    ("GET", "/bundle", "export"),
    ("GET", "/preview/{*path}", "serve"),
    ("GET", "/events", "serve"),
];

pub fn command() -> clap::Command {
    Cli::command()
}

#[derive(Debug)]
pub enum CliError {
    Usage(String),
    Engine(Error),
    Serve(ServeError),
    AlreadyInitialized(PathBuf),
}

impl CliError {
    pub fn code(&self) -> &str {
        match self {
            CliError::Usage(_) => "usage-error",
            CliError::Engine(e) => e.code(),
            CliError::Serve(e) => e.code(),
            CliError::AlreadyInitialized(_) => "already-initialized",
        }
    }

    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Usage(_) => 2,
            _ => 1,
        }
    }
}

impl std::fmt::Display for CliError {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            CliError::Usage(m) => f.write_str(m),
            CliError::Engine(e) => write!(f, "{e}"),
            CliError::Serve(e) => write!(f, "{e}"),
            CliError::AlreadyInitialized(p) => write!(f, "{} already holds a project", p.display()),
        }
    }
}

impl From<Error> for CliError {
    fn from(e: Error) -> Self {
        CliError::Engine(e)
    }
}

fn parse_point(s: &str) -> Result<Point, String> {
    let (x, y) = s.split_once(',').ok_or_else(|| format!("`{s}` is not an x,y pair"))?;
    let n = |v: &str| v.trim().parse::<f64>().map_err(|_| format!("`{s}` is not an x,y pair"));
    Ok(Point::new(n(x)?, n(y)?))
}

fn io_err(path: &Path, e: std::io::Error) -> CliError {
    CliError::Engine(Error::Io {
        path: path.to_path_buf(),
        source: e,
    })
}

fn backend(cli: &Cli, default_fixtures: &Path) -> Result<Arc<dyn LlmBackend>, CliError> {
    Ok(match cli.backend {
        BackendChoice::Live => Arc::new(LiveBackend::new(LiveConfig::from_env())),
        BackendChoice::Mock => {
            let dir = cli.fixtures.clone().unwrap_or_else(|| default_fixtures.to_path_buf());
            if dir.is_dir() {
                Arc::new(MockBackend::from_dir(&dir)?)
            } else if cli.fixtures.is_some() {
                return Err(CliError::Usage(format!("fixture directory {} not found", dir.display())));
            } else {
                Arc::new(MockBackend::new())
            }
        }
    })
}

fn config() -> EngineConfig {
    EngineConfig {
        generation: GenerationSettings::from_env(),
        ..EngineConfig::default()
    }
}

fn open(cli: &Cli) -> Result<Engine, CliError> {
    let project = store::load(&cli.dir)?;
    let backend = backend(cli, &cli.dir.join("fixtures"))?;
    Ok(Engine::new(project, backend).with_store(&cli.dir).with_config(config()))
}

fn scene_json(p: &Project) -> Value {
    json!({
        "name": p.name(),
        "framework": p.framework(),
        "canvas": {"width": CANVAS_WIDTH, "height": CANVAS_HEIGHT},
        "elements": p.scene().elements().collect::<Vec<_>>(),
        "proxies": p.scene().proxies(),
    })
}

fn to_value<T: serde::Serialize>(v: T) -> Value {
    serde_json::to_value(v).expect("engine types serialize")
}

fn now_ms() -> u64 {
    std::time::SystemTime::now()
        .duration_since(std::time::UNIX_EPOCH)
        .map(|d| d.as_millis() as u64)
        .unwrap_or(0)
}

/// Output of a successful command: JSON, or plain text for `context`.
pub enum Output {
    Json(Value),
    Text(String),
}

pub fn execute(cli: &Cli) -> Result<Output, CliError> {
    let out = match &cli.command {
        Command::Init { name, framework } => {
            if cli.dir.join("project.json").exists() {
                return Err(CliError::AlreadyInitialized(cli.dir.clone()));
            }
            let project = Project::new(name, *framework, now_ms());
            store::save(&project, &cli.dir)?;
            json!({"dir": cli.dir, "name": name, "framework": framework})
        }
        Command::Scene => open(cli)?.read(scene_json),
        Command::AddElement {
            name,
            kind,
            asset,
            members,
        } => {
            let engine = open(cli)?;
            let upload = match asset {
                Some(path) => Some(AssetUpload {
                    file_name: path.file_name().and_then(|n| n.to_str()).unwrap_or("asset").to_string(),
                    media_type: media_type(path).to_string(),
                    bytes: std::fs::read(path).map_err(|e| io_err(path, e))?,
                }),
                None => None,
            };
            let now = engine.now_ms();
            to_value(engine.mutate(|p| {
                let el = p.create_element(name, *kind, upload, now)?;
                if members.is_empty() {
                    return Ok(el);
                }
                let ids = members
                    .iter()
                    .map(|m| p.resolve_element(m).map(|e| e.id.clone()))
                    .collect::<Result<Vec<ElementId>, _>>()?;
                p.set_group_members(&el.id, ids)?;
                Ok(p.scene().element(&el.id)?.clone())
            })?)
        }
        Command::DeleteElement { element } => to_value(open(cli)?.mutate(|p| {
            let id = p.resolve_element(element)?.id.clone();
            p.delete_element(&id)
        })?),
        Command::SetTransform {
            element,
            x,
            y,
            rotation,
            scale,
        } => to_value(open(cli)?.mutate(|p| {
            let el = p.resolve_element(element)?;
            let (id, cur) = (el.id.clone(), el.transform);
            let t = Transform {
                x: x.unwrap_or(cur.x),
                y: y.unwrap_or(cur.y),
                rotation: rotation.unwrap_or(cur.rotation),
                scale: scale.unwrap_or(cur.scale),
            };
            p.set_transform(&id, t)
        })?),
        Command::AddProxy { kind, points } => to_value(open(cli)?.mutate(|p| p.add_proxy(*kind, points.clone()))?),
        Command::DeleteProxy { label } => to_value(open(cli)?.mutate(|p| p.delete_proxy(label))?),
        Command::Prompt { module, text } => {
            let engine = open(cli)?;
            let m = engine.read(|p| p.resolve_module(module))?;
            to_value(engine.generate(&m, text)?)
        }
        Command::SetSlider {
            element,
            variable,
            value,
        } => to_value(open(cli)?.mutate(|p| {
            let id = p.resolve_element(element)?.id.clone();
            p.apply_slider(&id, variable, *value)
        })?),
        Command::Sliders { element } => to_value(open(cli)?.read(|p| {
            let id = p.resolve_element(element)?.id.clone();
            p.slider_manifest(&id)
        })?),
        Command::Context { json } => {
            let project = store::load(&cli.dir)?;
            if *json {
                json!({
                    "compiled": project.context().compile(),
                    "summaries": project.context().summaries().collect::<Vec<_>>(),
                })
            } else {
                return Ok(Output::Text(project.context().compile()));
            }
        }
        Command::Session { module } => {
            let project = store::load(&cli.dir)?;
            let m = project.resolve_module(module)?;
            to_value(project.session(&m)?)
        }
        Command::Export { out, zip } => {
            let project = store::load(&cli.dir)?;
            let bundle = project.export_bundle()?;
            let out = out.clone().unwrap_or_else(|| cli.dir.join("export"));
            bundle.write_to(&out)?;
            if let Some(zip) = zip {
                let bytes = scenecraft_server::zip_bundle(&bundle).map_err(|e| io_err(zip, e))?;
                std::fs::write(zip, bytes).map_err(|e| io_err(zip, e))?;
            }
            json!({"out": out, "zip": zip, "files": bundle.files.len(), "digest": bundle.digest()})
        }
        Command::Replay { scenario: dir, out } => {
            let backend = backend(cli, &dir.join("fixtures"))?;
            let tmp;
            let target = match out {
                Some(p) => p.clone(),
                None => {
                    tmp = tempfile::tempdir().map_err(|e| io_err(&std::env::temp_dir(), e))?;
                    tmp.path().join("project")
                }
            };
            let report = replay(dir, &target, backend)?;
            let mut v = to_value(&report);
            if out.is_some() {
                v["project_dir"] = to_value(&target);
            }
            v
        }
        Command::Serve { host, port } => {
            let engine = Arc::new(open(cli)?);
            let addr = SocketAddr::new(*host, *port);
            let _ = tracing_subscriber::fmt().with_writer(std::io::stderr).try_init();
            let rt = tokio::runtime::Runtime::new().map_err(|e| io_err(&cli.dir, e))?;
            rt.block_on(scenecraft_server::serve(engine, addr)).map_err(CliError::Serve)?;
            Value::Null
        }
    };
    Ok(Output::Json(out))
}

fn media_type(path: &Path) -> &'static str {
    match path
        .extension()
        .and_then(|e| e.to_str())
        .map(str::to_ascii_lowercase)
        .as_deref()
    {
        Some("png") => "image/png",
        Some("jpg" | "jpeg") => "image/jpeg",
        Some("gif") => "image/gif",
        Some("svg") => "image/svg+xml",
        Some("webp") => "image/webp",
        _ => "application/octet-stream",
    }
}

fn error_json(code: &str, message: &str) -> String {
    json!({"code": code, "message": message}).to_string()
}

/// Parses `args`, runs the command and returns the process exit code.
/// Results go to `stdout`; failures go to `stderr` as `{code, message}`.
pub fn run<I, T>(args: I, stdout: &mut dyn Write, stderr: &mut dyn Write) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(c) => c,
        Err(e) => {
            use clap::error::ErrorKind;
            if matches!(e.kind(), ErrorKind::DisplayHelp | ErrorKind::DisplayVersion) {
                let _ = write!(stdout, "{e}");
                return 0;
            }
            let err = CliError::Usage(e.to_string().trim().to_string());
            let _ = writeln!(stderr, "{}", error_json(err.code(), &err.to_string()));
            return err.exit_code();
        }
    };
    match execute(&cli) {
        Ok(Output::Json(v)) => {
            if !v.is_null() {
                let _ = writeln!(stdout, "{}", serde_json::to_string_pretty(&v).expect("json"));
            }
            0
        }
        Ok(Output::Text(t)) => {
            let _ = write!(stdout, "{t}");
            0
        }
        Err(e) => {
            let _ = writeln!(stderr, "{}", error_json(e.code(), &e.to_string()));
            e.exit_code()
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn points_parse() {
        assert_eq!(parse_point("100,200").unwrap(), Point::new(100.0, 200.0));
        assert_eq!(parse_point(" -3.5, 4").unwrap(), Point::new(-3.5, 4.0));
        assert!(parse_point("100").is_err());
        assert!(parse_point("a,b").is_err());
    }

    #[test]
    fn usage_errors_are_json() {
        let (mut out, mut err) = (Vec::new(), Vec::new());
        let code = run(["scenecraft", "frobnicate"], &mut out, &mut err);
        assert_eq!(code, 2);
        let v: Value = serde_json::from_slice(&err).unwrap();
        assert_eq!(v["code"], "usage-error");
    }
}
