int gcd_steps(int a, int b)
{
    int steps = 0;
    while (a % b != 0) {
        int t = a % b;
        a = b;
        b = t;
        steps++;
    }
    return steps;
}
