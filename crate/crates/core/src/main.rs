fn main() {
    let status = gsmrac::cli::run_cli(std::env::args_os(), &mut std::io::stdout().lock(), &mut std::io::stderr().lock());
    std::process::exit(status.code());
}
