#include "spectra/service/cli.hpp"

int main(int argc, char** argv) { return spectra::service::cli_dispatch(argc, argv); }
