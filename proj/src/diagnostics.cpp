#include "necho/diagnostics.hpp"

#include <iostream>
#include <utility>

namespace necho {

namespace {

WarningHandler& handler_slot() {
    static WarningHandler h;
    return h;
}

}  // namespace

WarningHandler set_warning_handler(WarningHandler handler) {
    return std::exchange(handler_slot(), std::move(handler));
}

void warn(const std::string& message) {
    if (handler_slot()) {
        handler_slot()(message);
        return;
    }
    std::cerr << "warning: " << message << '\n';
}

}  // namespace necho
