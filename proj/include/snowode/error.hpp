#pragma once

#include <stdexcept>
#include <string>

namespace snowode {

class Error : public std::runtime_error
{
public:
    using std::runtime_error::runtime_error;
};

class InvalidConfiguration : public Error
{
public:
    using Error::Error;
};

class ShapeError : public Error
{
public:
    using Error::Error;
};

// Upper threshold below lower threshold, or a declared sign hint contradicted at runtime.
class InconsistentBounds : public Error
{
public:
    using Error::Error;
};

class DataError : public Error
{
public:
    using Error::Error;
};

class TrainingDiverged : public Error
{
public:
    TrainingDiverged(const std::string &what, int epoch, int batch)
        : Error(what), epoch_(epoch), batch_(batch)
    {
    }

    int epoch() const { return epoch_; }
    int batch() const { return batch_; }

private:
    int epoch_;
    int batch_;
};

} // namespace snowode
