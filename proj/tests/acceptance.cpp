// Acceptance gate: runs every verification criterion against the pinned
// tolerances and prints one line per criterion.  The exit status is the
// number of failed criteria, so a clean run exits 0.

#include <cstdio>
#include <exception>

#include "qlb/verify.hpp"

int main() {
    const char* ids[] = {"AC-1", "AC-2", "AC-3", "AC-4",  "AC-5",  "AC-6",
                         "AC-7", "AC-8", "AC-9", "AC-10", "AC-11", "AC-12"};
    qlb::VerifyContext ctx(0, "default");
    int failures = 0;
    for (const char* id : ids) {
        try {
            const std::vector<qlb::Criterion> got = qlb::run_criteria(ctx, {id});
            for (const qlb::Criterion& c : got) {
                std::printf("%s %s measured=%.3e tol=%.3e : %s\n", c.id.c_str(),
                            c.pass ? "PASS" : "FAIL", c.measured, c.tolerance,
                            c.description.c_str());
                if (!c.pass) {
                    std::printf("    %s\n", c.detail.c_str());
                    ++failures;
                }
            }
        } catch (const std::exception& e) {
            std::printf("%s FAIL : threw: %s\n", id, e.what());
            ++failures;
        }
        std::fflush(stdout);
    }
    std::printf("%d of 12 criteria failed\n", failures);
    return failures;
}
