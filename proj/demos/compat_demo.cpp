// Trains an old model on half the classes, then an unaligned and an aligned
// successor on all of them, and prints how well each new model's queries
// retrieve from the old gallery.
//
//   demo_compat [seed]

#include <cstdlib>
#include <iostream>

#include "hbct/hbct.hpp"

int main(int argc, char** argv) {
    using namespace hbct;
    const std::uint64_t seed = argc > 1 ? std::strtoull(argv[1], nullptr, 10) : 0;

    ExperimentConfig cfg;
    cfg.scenario.kind = ScenarioKind::ext_class;
    cfg.train.epochs = 40;

    const auto r = run_scenario_seed(cfg, seed);
    std::cout << "old model        self cmc@1 " << r.old_self.cmc1 << "\n"
              << "unaligned model  self cmc@1 " << r.star_self.cmc1 << "  vs old gallery " << r.star_cross.cmc1 << "\n"
              << "aligned model    self cmc@1 " << r.new_self.cmc1 << "  vs old gallery " << r.new_cross.cmc1
              << "\n\n"
              << report_table(r.reports);

    double seen = 0.0, unseen = 0.0;
    for (double u : r.old_seen_uncertainty) {
        seen += u;
    }
    for (double u : r.old_unseen_uncertainty) {
        unseen += u;
    }
    std::cout << "\nold-model uncertainty, classes it saw " << seen / static_cast<double>(r.old_seen_uncertainty.size())
              << ", classes it did not " << unseen / static_cast<double>(r.old_unseen_uncertainty.size()) << "\n";
    return 0;
}
