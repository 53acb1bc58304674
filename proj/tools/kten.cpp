#include "kten/cli.hpp"

int main(int argc, char** argv) { return kten::dispatch({argv + 1, argv + argc}); }
