#pragma once

#include <stdexcept>
#include <string>

namespace witten {

/**
 * Base class for every error raised by the library.
 *
 * Each error carries the module and operation that raised it, so that the
 * command-line front end can echo them back together with the offending
 * input.
 */
class Error : public std::runtime_error
{
    public:
        Error(std::string module, std::string operation, const std::string& what)
            : std::runtime_error(module + "::" + operation + ": " + what),
              module_(std::move(module)), operation_(std::move(operation))
        {
        }

        const std::string& module() const noexcept { return module_; }
        const std::string& operation() const noexcept { return operation_; }

    private:
        std::string module_;
        std::string operation_;
};

/// Precondition violated by the caller (bad degree, wrong shape, non-SPD mass, ...).
class InvalidInput : public Error
{
    public:
        using Error::Error;
};

/// A numerical procedure did not converge or produced an ambiguous answer.
class NumericalError : public Error
{
    public:
        using Error::Error;
};

/// Degenerate critical point or vector-field zero (nondegeneracy margin violated).
class DegenerateError : public Error
{
    public:
        using Error::Error;
};

/// Stable and unstable manifolds fail to meet transversally.
class TransversalityError : public Error
{
    public:
        using Error::Error;
};

/// Integer overflow during exact elimination.
class OverflowError : public Error
{
    public:
        using Error::Error;
};

}   // namespace witten
