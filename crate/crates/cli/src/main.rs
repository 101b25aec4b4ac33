use std::io::Write;

fn main() {
    let stdin = std::io::stdin();
    let mut stdin = stdin.lock();
    let mut stdout = std::io::stdout();
    let mut stderr = std::io::stderr();
    let code = abpr_cli::run_cli(
        std::env::args_os(),
        &mut abpr_cli::Io { stdin: &mut stdin, stdout: &mut stdout, stderr: &mut stderr },
    );
    let _ = stdout.flush();
    std::process::exit(code);
}
