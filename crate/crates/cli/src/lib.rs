//! The `embclf` command line.
//!
//! Exit codes: 0 on success, 1 for usage errors and invalid settings, 2 for
//! unreadable or invalid data, 3 when training fails numerically.

use std::ffi::OsString;
use std::io::Write;

use clap::error::ErrorKind;
use clap::Parser;
use log::info;

use embclf::Error;

pub mod args;
pub mod commands;

pub use args::{Cli, Command};

pub const EXIT_OK: i32 = 0;
pub const EXIT_USAGE: i32 = 1;
pub const EXIT_DATA: i32 = 2;
pub const EXIT_NUMERIC: i32 = 3;

/// Maps an error to the process exit code.
pub fn exit_code(e: &Error) -> i32 {
    if e.is_numeric() {
        return EXIT_NUMERIC;
    }
    match e {
        Error::Config(_) => EXIT_USAGE,
        Error::Fold { source, .. } => exit_code(source),
        _ => EXIT_DATA,
    }
}

fn init_logging(level: log::LevelFilter) {
    // Tests call `run` repeatedly within one process; later calls keep the
    // first logger.
    let _ = env_logger::Builder::new()
        .filter_level(level)
        .format(|buf, record| {
            writeln!(
                buf,
                "ts={} level={} {}",
                buf.timestamp_millis(),
                record.level().as_str().to_lowercase(),
                record.args()
            )
        })
        .try_init();
    log::set_max_level(level);
}

/// Parses `args` (including the program name) and runs the command.
/// Results go to `out`; usage and error messages go to `err`.
pub fn run<I, T>(args: I, out: &mut dyn Write, err: &mut dyn Write) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(cli) => cli,
        Err(e) => {
            let text = e.render().to_string();
            return match e.kind() {
                ErrorKind::DisplayHelp | ErrorKind::DisplayVersion => {
                    let _ = out.write_all(text.as_bytes());
                    EXIT_OK
                }
                _ => {
                    let _ = err.write_all(text.as_bytes());
                    EXIT_USAGE
                }
            };
        }
    };
    init_logging(cli.log_level.into());
    info!(
        "event=config config={}",
        serde_json::to_string(&cli).expect("arguments serialize to JSON")
    );

    match dispatch(&cli.command, out) {
        Ok(()) => EXIT_OK,
        Err(e) => {
            let _ = writeln!(err, "error: {e}");
            exit_code(&e)
        }
    }
}

fn dispatch(cmd: &Command, out: &mut dyn Write) -> embclf::Result<()> {
    use commands::*;
    match cmd {
        Command::Tokenize(a) => tokenize_cmd(a, out),
        Command::Vocab(a) => vocab_cmd(a, out),
        Command::TrainEmbeddings(a) => train_embeddings_cmd(a),
        Command::Nn(a) => nn_cmd(a, out),
        Command::Analogy(a) => analogy_cmd(a, out),
        Command::TrainClassifier(a) => train_classifier_cmd(a),
        Command::Predict(a) => predict_cmd(a, out),
        Command::CrossValidate(a) => cross_validate_cmd(a, out),
        Command::Compare(a) => compare_cmd(a, out),
        Command::ConvertVectors(a) => convert_cmd(a),
        Command::Gridsearch(a) => gridsearch_cmd(a, out),
        Command::Synth(a) => synth_cmd(a),
    }
}
