#include "sit/kernels.hpp"

#include <cstdlib>
#include <string>

#include "sit/error.hpp"

namespace sit::kernels {
namespace {

const KernelTable* g_active = nullptr;

const KernelTable* pick_default() {
    if (const char* env = std::getenv("SIT_KERNELS")) {
        const std::string_view want(env);
        if (want == "scalar") return &scalar_table();
        if (want == "avx2") {
            if (const KernelTable* t = avx2_table_or_null()) return t;
            throw Error("SIT_KERNELS=avx2 but AVX2 is unavailable on this CPU");
        }
        throw Error("unknown SIT_KERNELS value: " + std::string(want));
    }
    if (const KernelTable* t = avx2_table_or_null()) return t;
    return &scalar_table();
}

} // namespace

const KernelTable& active() {
    if (!g_active) g_active = pick_default();
    return *g_active;
}

void select(std::string_view name) {
    if (name == "scalar") {
        g_active = &scalar_table();
        return;
    }
    if (name == "avx2") {
        if (const KernelTable* t = avx2_table_or_null()) {
            g_active = t;
            return;
        }
        throw Error("AVX2 kernels unavailable on this CPU");
    }
    throw Error("unknown kernel table: " + std::string(name));
}

} // namespace sit::kernels
