fn main() {
    std::process::exit(pq_spectra::cli::run(std::env::args_os()));
}
