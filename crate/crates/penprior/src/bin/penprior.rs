fn main() {
    let result = penprior::cli::run(std::env::args_os());
    if !result.summary.is_empty() {
        eprintln!("{}", result.summary);
    }
    std::process::exit(result.exit_code);
}
