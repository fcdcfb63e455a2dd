int sum_range_checked(int *v, int len, int start, int n)
{
    int s = 0;
    int i;
    if (start < 0 || n < 0 || start > len - n)
        return 0;
    for (i = start; i < start + n; i++)
        s += v[i];
    return s;
}
