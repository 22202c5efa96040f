// Writes the RH5 fixture model file to stdout.
#include <iostream>

#include "hddp/rh5.hpp"

int main()
{
    std::cout << hddp::rh5::model_text();
    return 0;
}
