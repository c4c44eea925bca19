//! Configuration files, CSV bundles and the `fraginv` command line on top of
//! [`fraginv_core`].

pub mod cli;
pub mod commands;
pub mod config;
pub mod output;

pub use cli::{run, Cli};
pub use commands::{cmd_bench, cmd_forward, cmd_invert, cmd_taylor, CommandError};
pub use config::{parse_config, parse_config_str, ConfigError, RunConfig};
