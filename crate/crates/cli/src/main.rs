use std::process::ExitCode;

use clap::Parser;
use fedleaf_cli::{run, Cli};

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e)
            if e.downcast_ref::<std::io::Error>()
                .is_some_and(|io| io.kind() == std::io::ErrorKind::BrokenPipe) =>
        {
            ExitCode::SUCCESS
        }
        Err(e) => {
            let chain: Vec<String> = e.chain().map(ToString::to_string).collect();
            let record = serde_json::json!({
                "status": "error",
                "error": e.to_string(),
                "causes": &chain[1..],
            });
            eprintln!("{record}");
            ExitCode::FAILURE
        }
    }
}
