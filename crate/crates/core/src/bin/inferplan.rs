use std::io::Write;

fn main() {
    let out = inferplan::cli::dispatch_command(std::env::args_os());
    print!("{}", out.stdout);
    eprint!("{}", out.stderr);
    std::io::stdout().flush().ok();
    std::process::exit(out.status);
}
