// Runs the ACC scenario set and prints min h, event count and MIET per run.

#include "shcbf/acc.hpp"

#include <iomanip>
#include <iostream>

int main() {
    using namespace shcbf;
    std::cout << std::left << std::setw(12) << "scenario" << std::setw(16) << "min_h" << std::setw(8) << "events"
              << "miet\n";
    for (const auto& sc : acc::acc_scenarios()) {
        const Trace tr = run(sc.build());
        const AnalysisReport rep = analyze(tr);
        std::cout << std::setw(12) << sc.name << std::setw(16) << rep.min_h << std::setw(8) << rep.num_events
                  << (rep.min_gap ? std::to_string(*rep.min_gap) : "-") << '\n';
    }
}
