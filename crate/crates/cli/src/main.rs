use std::io::Write;
use std::process::ExitCode;

fn main() -> ExitCode {
    if let Some(n) = std::env::var("ORTHOPLEX_THREADS").ok().and_then(|v| v.parse::<usize>().ok()) {
        if n > 0 {
            let _ = rayon::ThreadPoolBuilder::new().num_threads(n).build_global();
        }
    }
    let result = orthoplex_cli::run(std::env::args_os());
    let _ = std::io::stdout().write_all(result.stdout.as_bytes());
    let _ = std::io::stderr().write_all(result.stderr.as_bytes());
    ExitCode::from(result.exit_code.clamp(0, 255) as u8)
}
