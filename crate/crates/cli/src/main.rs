//! `memento`: datetime negotiation from the command line.

mod net;

use std::io::Write;
use std::path::{Path, PathBuf};
use std::process::ExitCode;
use std::sync::Arc;

use anyhow::Context;
use clap::{Args, Parser, Subcommand};

use memento_core::aggregator::AggregatorConfig;
use memento_core::archive::ArchiveConfig;
use memento_core::gateway::parse_datetime_param;
use memento_core::origin::{DatetimeRedirect, RedirectPolicy};
use memento_core::{
    load_canned, load_scenario, rewrite_links, Aggregator, ArchiveNode, ArchiveService, ArchiveStore, Gateway,
    GatewayConfig, GatewayError, GatewayService, Handler, Scenario, SystemClock, TravelRequest,
};

use net::{serve, UpstreamProxy, UreqTransport};

const EXIT_NOT_FOUND: u8 = 1;
const EXIT_USAGE: u8 = 2;
const EXIT_FAILURE: u8 = 3;

#[derive(Parser)]
#[command(name = "memento", version, about = "Datetime content negotiation for HTTP")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

/// Where the gateway sends its requests.
#[derive(Args, Clone, Default)]
struct Backend {
    /// Gateway config file (TOML); real network.
    #[arg(long, conflicts_with = "scenario")]
    config: Option<PathBuf>,
    /// Canned scenario name or scenario file; simulated network.
    #[arg(long)]
    scenario: Option<String>,
    /// Advance the simulated clock to this HTTP-date first.
    #[arg(long, requires = "scenario")]
    now: Option<String>,
}

#[derive(Subcommand)]
enum Command {
    /// Negotiate a memento of <URI> near a datetime.
    Travel {
        uri: String,
        /// HTTP-date, or an X-Accept-Datetime list.
        #[arg(long)]
        datetime: String,
        /// Print the hop-by-hop trace instead of the body.
        #[arg(long)]
        trace: bool,
        /// Print only the body, without link rewriting.
        #[arg(long)]
        raw: bool,
        #[command(flatten)]
        backend: Backend,
    },
    /// Print the merged TimeMap of <URI> from the fallback TimeGate.
    Timemap {
        uri: String,
        #[command(flatten)]
        backend: Backend,
    },
    /// GET <URI> with no temporal headers.
    Fetch {
        uri: String,
        #[command(flatten)]
        backend: Backend,
    },
    /// Run the gateway HTTP service.
    Serve {
        #[command(flatten)]
        backend: Backend,
        /// Overrides the configured listen address.
        #[arg(long)]
        listen: Option<String>,
    },
    /// Run an archive node.
    Archive {
        #[arg(long)]
        config: PathBuf,
    },
    /// Run a TimeGate aggregator.
    Aggregator {
        #[arg(long)]
        config: PathBuf,
    },
    /// Redirect datetime requests to a TimeGate and forward everything else upstream.
    Proxy {
        #[arg(long)]
        upstream: String,
        /// Redirect policy file (TOML).
        #[arg(long)]
        policy: PathBuf,
        #[arg(long, default_value = "127.0.0.1:8081")]
        listen: String,
    },
}

/// A failure with its exit code.
struct Failure {
    code: u8,
    error: anyhow::Error,
}

impl From<anyhow::Error> for Failure {
    fn from(error: anyhow::Error) -> Self {
        Failure {
            code: EXIT_FAILURE,
            error,
        }
    }
}

fn usage(error: impl Into<anyhow::Error>) -> Failure {
    Failure {
        code: EXIT_USAGE,
        error: error.into(),
    }
}

fn gateway_failure(e: GatewayError, show_trace: bool) -> Failure {
    if show_trace {
        if let Some(trace) = e.trace() {
            eprint!("{}", trace.to_table());
        }
    }
    let code = match e {
        GatewayError::NoMementoFound { .. } => EXIT_NOT_FOUND,
        GatewayError::InvalidRequest(_) => EXIT_USAGE,
        _ => EXIT_FAILURE,
    };
    Failure {
        code,
        error: e.into(),
    }
}

fn read(path: &Path) -> anyhow::Result<String> {
    std::fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))
}

fn open_scenario(name: &str) -> anyhow::Result<Scenario> {
    if memento_core::netsim::canned_scenario(name).is_some() {
        return Ok(load_canned(name)?);
    }
    Ok(load_scenario(&read(Path::new(name))?)?)
}

/// A gateway, plus the scenario that backs it when simulated.
struct Session {
    gateway: Gateway,
    _scenario: Option<Scenario>,
}

fn session(backend: &Backend, listen: Option<&str>) -> Result<Session, Failure> {
    if let Some(name) = &backend.scenario {
        let scenario = open_scenario(name).map_err(usage)?;
        if let Some(now) = &backend.now {
            let t = memento_core::parse_http_date(now).map_err(usage)?;
            scenario.web.advance_clock(t).map_err(usage)?;
        }
        let (host, gw) = scenario
            .gateway()
            .ok_or_else(|| usage(anyhow::anyhow!("scenario {name} has no gateway host")))?;
        let mut config = gw.config().clone();
        if let Some(addr) = listen {
            config.gateway_base = format!("http://{addr}");
            config.listen = addr.to_string();
        }
        let gateway = Gateway::new(config, Arc::new(scenario.web.client(host)));
        return Ok(Session {
            gateway,
            _scenario: Some(scenario),
        });
    }
    let mut config = match &backend.config {
        Some(path) => GatewayConfig::from_toml(&read(path)?).map_err(usage)?,
        None => GatewayConfig::new("http://127.0.0.1:8080", None),
    };
    if let Some(addr) = listen {
        config.gateway_base = format!("http://{addr}");
        config.listen = addr.to_string();
    }
    Ok(Session {
        gateway: Gateway::new(config, Arc::new(UreqTransport::new())),
        _scenario: None,
    })
}

fn travel(uri: &str, datetime: &str, trace: bool, raw: bool, backend: &Backend) -> Result<(), Failure> {
    let prefs = parse_datetime_param(datetime)
        .ok_or_else(|| usage(anyhow::anyhow!("cannot parse datetime {datetime:?}")))?;
    let s = session(backend, None)?;
    let req = TravelRequest::new(uri, prefs.clone()).with_max_hops(s.gateway.config().max_hops);
    let m = s.gateway.travel(&req).map_err(|e| gateway_failure(e, trace))?;
    let mut out = std::io::stdout().lock();
    if raw {
        out.write_all(&m.body).context("writing body")?;
        return Ok(());
    }
    let mut head = format!("URI-M: {}\n", m.final_uri);
    if let Some(t) = m.memento_datetime {
        head.push_str(&format!("Memento-Datetime: {t}\n"));
    }
    if let Some(v) = m.validity {
        head.push_str(&format!("Datetime-Validity: {v}\n"));
    }
    if m.remediated {
        head.push_str("Remediated: yes\n");
    }
    if m.rerouted {
        head.push_str("Rerouted: yes\n");
    }
    head.push('\n');
    out.write_all(head.as_bytes()).context("writing output")?;
    if trace {
        out.write_all(m.trace.to_table().as_bytes()).context("writing trace")?;
    } else {
        let body = if m.media_type.starts_with("text/html") {
            rewrite_links(&m.body, &prefs, &s.gateway.config().gateway_base)
        } else {
            m.body
        };
        out.write_all(&body).context("writing body")?;
    }
    Ok(())
}

fn timemap(uri: &str, backend: &Backend) -> Result<(), Failure> {
    let s = session(backend, None)?;
    let map = s.gateway.timemap(uri).map_err(|e| gateway_failure(e, false))?;
    writeln!(std::io::stdout(), "{}", map.to_json()).context("writing TimeMap")?;
    Ok(())
}

fn fetch(uri: &str, backend: &Backend) -> Result<(), Failure> {
    let s = session(backend, None)?;
    let (resp, _) = s.gateway.fetch(uri).map_err(|e| gateway_failure(e, false))?;
    eprintln!("HTTP {}", resp.status);
    std::io::stdout().write_all(&resp.body).context("writing body")?;
    if resp.status >= 400 {
        return Err(Failure {
            code: EXIT_NOT_FOUND,
            error: anyhow::anyhow!("{uri} answered {}", resp.status),
        });
    }
    Ok(())
}

fn run(cli: Cli) -> Result<(), Failure> {
    match cli.command {
        Command::Travel {
            uri,
            datetime,
            trace,
            raw,
            backend,
        } => travel(&uri, &datetime, trace, raw, &backend),
        Command::Timemap { uri, backend } => timemap(&uri, &backend),
        Command::Fetch { uri, backend } => fetch(&uri, &backend),
        Command::Serve { backend, listen } => {
            if backend.config.is_none() && backend.scenario.is_none() {
                return Err(usage(anyhow::anyhow!("serve needs --config or --scenario")));
            }
            let configured = match &backend.config {
                Some(path) => Some(GatewayConfig::from_toml(&read(path)?).map_err(usage)?.listen),
                None => None,
            };
            let addr = listen.or(configured).unwrap_or_else(|| "127.0.0.1:8080".to_string());
            let s = session(&backend, Some(&addr))?;
            let service: Arc<dyn Handler> = Arc::new(GatewayService::new(s.gateway));
            serve(service, &addr)?;
            Ok(())
        }
        Command::Archive { config } => {
            let cfg: ArchiveConfig = toml::from_str(&read(&config)?).map_err(usage)?;
            let store = if cfg.store_path.is_empty() {
                ArchiveStore::in_memory()
            } else {
                ArchiveStore::open(&cfg.store_path).context("opening archive store")?
            };
            let node = ArchiveNode::new(cfg.base_uri, Arc::new(store)).with_window(cfg.window);
            let service = ArchiveService::new(Arc::new(node), Arc::new(SystemClock));
            serve(Arc::new(service), &cfg.listen)?;
            Ok(())
        }
        Command::Aggregator { config } => {
            let cfg: AggregatorConfig = toml::from_str(&read(&config)?).map_err(usage)?;
            let registry = cfg.registry().map_err(usage)?;
            let aggregator = Aggregator::new(
                cfg.base_uri.clone(),
                registry,
                Arc::new(UreqTransport::new()),
                Arc::new(SystemClock),
            )
            .with_window(cfg.window);
            serve(Arc::new(aggregator), &cfg.listen)?;
            Ok(())
        }
        Command::Proxy {
            upstream,
            policy,
            listen,
        } => {
            let policy = RedirectPolicy::from_toml(&read(&policy)?).map_err(usage)?;
            if !memento_core::http::is_absolute_http(&upstream) {
                return Err(usage(anyhow::anyhow!("--upstream must be an absolute http URI")));
            }
            let handler = DatetimeRedirect::new(policy, UpstreamProxy::new(upstream));
            serve(Arc::new(handler), &listen)?;
            Ok(())
        }
    }
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    let cli = Cli::parse();
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(f) => {
            eprintln!("error: {:#}", f.error);
            if f.code == EXIT_USAGE {
                eprintln!("run `memento --help` for usage");
            }
            ExitCode::from(f.code)
        }
    }
}
