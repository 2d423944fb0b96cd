fn main() {
    let code = rhirl_workbench::cli::run(std::env::args_os(), &mut std::io::stdout());
    std::process::exit(code);
}
