#include "watermap/kernels.hpp"

#include <atomic>

#include "watermap/errors.hpp"

namespace watermap::kern {

namespace {

std::atomic<const Ops*> g_active{nullptr};
std::atomic<Backend> g_selected{Backend::Auto};

} // namespace

bool avx2_available() {
    if (avx2_ops() == nullptr) return false;
#if defined(__GNUC__) && (defined(__x86_64__) || defined(__i386__))
    return __builtin_cpu_supports("avx2") && __builtin_cpu_supports("fma");
#else
    return false;
#endif
}

void select(Backend b) {
    switch (b) {
        case Backend::Scalar:
            g_active.store(&scalar_ops());
            break;
        case Backend::Avx2:
            if (!avx2_available())
                throw ConfigError("avx2 kernels requested but not available on this host");
            g_active.store(avx2_ops());
            break;
        case Backend::Auto:
            g_active.store(avx2_available() ? avx2_ops() : &scalar_ops());
            break;
    }
    g_selected.store(b);
}

Backend selected() { return g_selected.load(); }

const Ops& active() {
    const Ops* ops = g_active.load();
    if (!ops) {
        select(Backend::Auto);
        ops = g_active.load();
    }
    return *ops;
}

} // namespace watermap::kern
