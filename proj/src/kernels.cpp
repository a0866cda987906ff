#include "tsfactor/kernels.hpp"

namespace tsf::kern {

const KernelTable* avx2_table_impl();  // defined in kernels_avx2.cpp

const KernelTable* avx2_table() {
    static const KernelTable* table = [] {
        const bool supported =
            __builtin_cpu_supports("avx2") && __builtin_cpu_supports("fma");
        return supported ? avx2_table_impl() : nullptr;
    }();
    return table;
}

const KernelTable& active() {
    static const KernelTable& table = avx2_table() ? *avx2_table() : scalar_table();
    return table;
}

std::vector<const KernelTable*> available_tables() {
    std::vector<const KernelTable*> tables{&scalar_table()};
    if (const KernelTable* t = avx2_table()) tables.push_back(t);
    return tables;
}

}  // namespace tsf::kern
