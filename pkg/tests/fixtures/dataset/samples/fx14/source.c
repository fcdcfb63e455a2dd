int average_guarded(int total, int count)
{
    if (count == 0)
        return 0;
    if (total == -2147483647 - 1 && count == -1)
        return 0;
    return total / count;
}
