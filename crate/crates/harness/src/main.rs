fn main() {
    std::process::exit(reebsim_cli::run(std::env::args_os()));
}
