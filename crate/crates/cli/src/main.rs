use std::io::Write;

fn main() {
    let report = symkit_cli::execute(std::env::args_os());
    eprint!("{}", report.errors);
    let written = match &report.output {
        Some(p) if report.exit_code != symkit_cli::EXIT_USAGE => std::fs::write(p, &report.body)
            .map_err(|e| format!("{}: {e}", p.display())),
        _ => std::io::stdout().write_all(report.body.as_bytes()).map_err(|e| e.to_string()),
    };
    if let Err(e) = written {
        eprintln!("error: {e}");
        std::process::exit(symkit_cli::EXIT_FAIL);
    }
    if std::env::var_os("SYMKIT_TIMING").is_some() {
        eprintln!("{}: {:.3}s", report.command, report.wall_time.as_secs_f64());
    }
    std::process::exit(report.exit_code);
}
