fn main() {
    std::process::exit(density_sampling::cli::run_command(std::env::args_os()));
}
