#include "pidlf/accounting.hpp"

namespace pidlf {

AllocationStats& allocation_stats(Ledger ledger) {
    static AllocationStats factors;
    static AllocationStats pid_state;
    static AllocationStats optimizer;
    switch (ledger) {
        case Ledger::factors:
            return factors;
        case Ledger::pid_state:
            return pid_state;
        case Ledger::optimizer:
            break;
    }
    return optimizer;
}

}  // namespace pidlf
