#pragma once

// Entry point for the batch front end; tools/peit_main.cpp forwards here.

namespace peit {

int cli_main(int argc, char** argv);

} // namespace peit
