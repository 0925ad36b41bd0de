fn main() {
    std::process::exit(spikelab_cli::dispatch(std::env::args_os()));
}
