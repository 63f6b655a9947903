// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <stdexcept>
#include <string>

namespace snnconv {

// Base error. The message is prefixed with the module tag, e.g. "[netspec] ...".
class Error : public std::runtime_error {
public:
    Error(const std::string& module, const std::string& what)
        : std::runtime_error("[" + module + "] " + what), module_(module) {}

    const std::string& module() const noexcept { return module_; }

private:
    std::string module_;
};

// Bad user input: malformed files, shape mismatches, invalid parameters.
// The CLI maps this to exit code 2.
class InputError : public Error {
public:
    using Error::Error;
};

} // namespace snnconv
