fn main() {
    env_logger::init();
    let code = jlcm::cli::main_with_args(std::env::args_os(), &mut std::io::stderr());
    std::process::exit(code);
}
