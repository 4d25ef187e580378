fn main() {
    std::process::exit(efx_core::cli::run(std::env::args_os()));
}
