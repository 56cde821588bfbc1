#define DOCTEST_CONFIG_IMPLEMENT
#include <doctest.h>

#include "onn/runtime.hpp"

int main(int argc, char** argv) {
    onn::tune_allocator();
    doctest::Context ctx(argc, argv);
    return ctx.run();
}
