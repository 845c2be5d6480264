#pragma once

#include <stdexcept>
#include <string>
#include <vector>

namespace stochdom {

class Error : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

/// Invalid input: mismatched meshes, malformed files, bad preconditions.
class InputError : public Error {
public:
    using Error::Error;
};

class SamplingError : public Error {
public:
    SamplingError(long long index, int retries, const std::string& why)
        : Error("sample " + std::to_string(index) + " rejected after " + std::to_string(retries)
                + " redraws: " + why),
          index(index), retries(retries)
    {
    }
    long long index;
    int retries;
};

/// A triangle collapsed (zero or negative area) under a map or construction.
class DegeneracyError : public Error {
public:
    DegeneracyError(int subdomain, long long sample, const std::string& what)
        : Error(what + " (subdomain " + std::to_string(subdomain) + ", sample " + std::to_string(sample) + ")"),
          subdomain(subdomain), sample(sample)
    {
    }
    int subdomain;
    long long sample;
};

class DomainError : public Error {
public:
    using Error::Error;
};

class AssemblyError : public Error {
public:
    AssemblyError(int subdomain, const std::string& what)
        : Error(what + " (subdomain " + std::to_string(subdomain) + ")"), subdomain(subdomain)
    {
    }
    int subdomain;
};

class SolverError : public Error {
public:
    SolverError(const std::string& what, std::vector<double> history)
        : Error(what), residual_history(std::move(history))
    {
    }
    std::vector<double> residual_history;
};

/// Any failure inside one sample's solve, tagged with the sample index.
class SampleError : public Error {
public:
    SampleError(long long index, const std::string& what)
        : Error("sample " + std::to_string(index) + ": " + what), index(index)
    {
    }
    long long index;
};

class RefinementError : public Error {
public:
    using Error::Error;
};

class ConfigError : public Error {
public:
    ConfigError(const std::string& key, const std::string& what)
        : Error(key + ": " + what), key(key)
    {
    }
    std::string key;
};

} // namespace stochdom
