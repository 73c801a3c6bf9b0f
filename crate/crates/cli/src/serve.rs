//! Runs the HTTP gateway.

use std::net::SocketAddr;
use std::path::PathBuf;
use std::sync::Arc;

use remini_core::clock::ManualClock;
use remini_core::llm::{CompletionProvider, RemoteConfig, RemoteProvider, ScriptedProvider};
use remini_core::PromptCorpus;
use remini_gateway::{Gateway, GatewayConfig, JournalLocation};

use crate::error::CliError;
use crate::simulate::{Script, CLOCK_START_MS, CLOCK_STEP_MS};

pub enum ProviderChoice {
    Remote,
    Scripted(PathBuf),
}

pub struct ServeOptions {
    pub bind: SocketAddr,
    pub corpus: Arc<PromptCorpus>,
    pub journals: Option<PathBuf>,
    pub provider: ProviderChoice,
    pub deterministic_clock: bool,
}

pub fn serve(options: ServeOptions) -> Result<(), CliError> {
    let (driver, analyzer): (Arc<dyn CompletionProvider>, Arc<dyn CompletionProvider>) = match &options.provider {
        ProviderChoice::Remote => {
            let config = RemoteConfig::from_env().map_err(|e| CliError::Config(e.to_string()))?;
            let provider = Arc::new(RemoteProvider::new(config).map_err(|e| CliError::Config(e.to_string()))?);
            (provider.clone(), provider)
        }
        ProviderChoice::Scripted(path) => {
            let script = Script::load(path)?;
            (
                Arc::new(ScriptedProvider::new(script.bot_responses())),
                Arc::new(ScriptedProvider::new(script.summary_responses())),
            )
        }
    };
    let mut config = GatewayConfig::new(options.corpus, driver, analyzer);
    if let Some(dir) = options.journals {
        std::fs::create_dir_all(&dir).map_err(CliError::io(&dir))?;
        config.journal = JournalLocation::Dir(dir);
    }
    if options.deterministic_clock {
        let clock = ManualClock::new(CLOCK_START_MS, CLOCK_STEP_MS);
        config.clock = Arc::new(move || Box::new(clock.clone()));
    }

    let runtime = tokio::runtime::Runtime::new().map_err(|e| CliError::Session(e.to_string()))?;
    runtime.block_on(async {
        let listener = tokio::net::TcpListener::bind(options.bind)
            .await
            .map_err(|e| CliError::Config(format!("cannot bind {}: {e}", options.bind)))?;
        let addr = listener.local_addr().map_err(|e| CliError::Session(e.to_string()))?;
        tracing::info!(%addr, "listening");
        println!("{}", serde_json::json!({ "listening": addr.to_string() }));
        remini_gateway::serve(listener, Gateway::new(config))
            .await
            .map_err(|e| CliError::Session(e.to_string()))
    })
}
