//! Command-line front end for `archflow`.
//!
//! Exit codes: 0 on success, 1 on runtime failure, 2 on usage errors.

pub mod args;
pub mod run;

pub use args::{parse_args, parse_invocation, resolve, Command, Format, Subcommand, ThetaSpec};
pub use run::{execute, RunError};

use std::ffi::OsString;
use std::io::Write;

pub const EXIT_RUNTIME: i32 = 1;
pub const EXIT_USAGE: i32 = 2;

/// Full pipeline behind the binary: parse, read the config file, execute.
/// Diagnostics go to `stderr`; the returned value is the process exit code.
pub fn main_with<I, S>(args: I, stdout: &mut dyn Write, stderr: &mut dyn Write) -> i32
where
    I: IntoIterator<Item = S>,
    S: Into<OsString> + Clone,
{
    let cli = match parse_args(args) {
        Ok(cli) => cli,
        Err(e) => return report_usage(e, stdout, stderr),
    };
    let config_text = match cli.config_path() {
        None => None,
        Some(path) => match std::fs::read_to_string(path) {
            Ok(text) => Some(text),
            Err(e) => {
                let err = args::usage_error(format!("cannot read config {}: {e}", path.display()));
                return report_usage(err, stdout, stderr);
            }
        },
    };
    let cmd = match resolve(cli, config_text.as_deref()) {
        Ok(cmd) => cmd,
        Err(e) => return report_usage(e, stdout, stderr),
    };
    match execute(&cmd, stdout) {
        Ok(()) => 0,
        Err(e) => {
            let _ = writeln!(stderr, "error: {e}");
            EXIT_RUNTIME
        }
    }
}

fn report_usage(e: clap::Error, stdout: &mut dyn Write, stderr: &mut dyn Write) -> i32 {
    let text = e.render().to_string();
    // --help and --version land here too, with exit code 0.
    if e.use_stderr() {
        let _ = stderr.write_all(text.as_bytes());
    } else {
        let _ = stdout.write_all(text.as_bytes());
    }
    e.exit_code()
}
