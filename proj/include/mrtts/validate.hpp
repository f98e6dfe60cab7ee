#pragma once

#include <cstdint>
#include <vector>

#include "mrtts/oracle.hpp"

namespace mrtts {

struct ValidationCheck {
    oracle::OracleReport report;
    double tolerance = 0.0;

    bool passed() const { return report.within(tolerance); }
};

// Runs every fast kernel and a full decode against its oracle on seeded
// random inputs. `cases` scales the number of kernel cases per check.
std::vector<ValidationCheck> run_validation(std::uint64_t seed, std::size_t cases = 50);

// Only the single-kernel checks, `cases` random cases each.
std::vector<ValidationCheck> run_kernel_validation(std::uint64_t seed, std::size_t cases);

}  // namespace mrtts
